use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};

/// Fewest correspondences that constrain rotation, translation and focal length.
pub const MIN_CORRESPONDENCES: usize = 4;

/// One 2D-3D pair: an object-frame point and its observed pixel location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point3: Vec3,
    pub point2: Vec2,
    pub weight: f64,
}

impl Correspondence {
    pub fn new(point3: Vec3, point2: Vec2) -> Self {
        Self {
            point3,
            point2,
            weight: 1.0,
        }
    }

    pub fn weighted(point3: Vec3, point2: Vec2, weight: f64) -> Self {
        Self {
            point3,
            point2,
            weight,
        }
    }
}

/// Ordered list of correspondences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(items: Vec<Correspondence>) -> Result<Self> {
        for c in &items {
            let finite = c
                .point3
                .iter()
                .chain(c.point2.iter())
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidArgument(
                    "correspondence has non-finite coordinates",
                ));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidArgument("correspondence weight must be >= 0"));
            }
        }
        Ok(Self { items })
    }

    pub fn from_pairs(points3: &[Vec3], points2: &[Vec2]) -> Result<Self> {
        if points3.len() != points2.len() {
            return Err(Error::InvalidArgument("point lists differ in length"));
        }
        Self::new(
            points3
                .iter()
                .zip(points2)
                .map(|(p3, p2)| Correspondence::new(*p3, *p2))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    /// Keeps the items whose mask entry is true.
    pub fn subset(&self, mask: &[bool]) -> Self {
        Self {
            items: self
                .items
                .iter()
                .zip(mask)
                .filter(|(_, keep)| **keep)
                .map(|(c, _)| *c)
                .collect(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            items: indices.iter().map(|&i| self.items[i]).collect(),
        }
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.items.len() < needed {
            Err(Error::NotEnoughCorrespondences {
                needed,
                got: self.items.len(),
            })
        } else {
            Ok(())
        }
    }
}

impl<'a> IntoIterator for &'a CorrespondenceSet {
    type Item = &'a Correspondence;
    type IntoIter = core::slice::Iter<'a, Correspondence>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
