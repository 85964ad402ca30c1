//! Shared domain types: feature categories, class labels, 2-D points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The seven facial feature categories. The declaration order is the
/// canonical one used everywhere a fixed ordering matters (neural-network
/// fusion inputs, concatenated global features, serialized dumps).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    /// Eyeblink: open/closed eye confidence in [0, 1], 1 value per frame.
    #[serde(rename = "EB")]
    Eb,
    /// Eye aspect ratio, one value per eye.
    #[serde(rename = "EAR")]
    Ear,
    /// Head size: width and height in pixels.
    #[serde(rename = "HS")]
    Hs,
    /// Nose size: width and height in pixels.
    #[serde(rename = "NS")]
    Ns,
    /// Head pose: pitch and yaw angles.
    #[serde(rename = "HP")]
    Hp,
    /// Facial expression embedding, 16 values per frame.
    #[serde(rename = "Exp")]
    Exp,
    /// Heart rate estimate, 1 value per frame.
    #[serde(rename = "H")]
    H,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Eb,
        Category::Ear,
        Category::Hs,
        Category::Ns,
        Category::Hp,
        Category::Exp,
        Category::H,
    ];

    /// Number of feature values per frame for this category.
    pub fn dim(self) -> usize {
        match self {
            Category::Eb => 1,
            Category::Ear => 2,
            Category::Hs => 2,
            Category::Ns => 2,
            Category::Hp => 2,
            Category::Exp => 16,
            Category::H => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Eb => "EB",
            Category::Ear => "EAR",
            Category::Hs => "HS",
            Category::Ns => "NS",
            Category::Hp => "HP",
            Category::Exp => "Exp",
            Category::H => "H",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "EB" | "eb" => Ok(Category::Eb),
            "EAR" | "ear" => Ok(Category::Ear),
            "HS" | "hs" => Ok(Category::Hs),
            "NS" | "ns" => Ok(Category::Ns),
            "HP" | "hp" => Ok(Category::Hp),
            "Exp" | "EXP" | "exp" => Ok(Category::Exp),
            "H" | "h" => Ok(Category::H),
            other => Err(UnknownCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("unknown category `{0}` (expected one of EB, EAR, HS, NS, HP, Exp, H)")]
pub struct UnknownCategory(pub String);

/// Binary attention label for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Low,
    High,
}

impl Label {
    /// Signed encoding used by the trainers: Low -> -1, High -> +1.
    pub fn signum(self) -> f64 {
        match self {
            Label::Low => -1.0,
            Label::High => 1.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Low => f.write_str("Low"),
            Label::High => f.write_str("High"),
        }
    }
}

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}
