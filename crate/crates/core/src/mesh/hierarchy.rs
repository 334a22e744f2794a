use super::{bisect_marked, refine_regular, Mesh, Prolongation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Regular refinement with refinement index `beta` (always 2 here).
    Uniform { beta: u32 },
    Adaptive,
}

/// Nested meshes `T_1 ⊂ T_2 ⊂ …` with per-level transfer maps.
/// `prolongations[k]` maps level `k` into level `k + 1`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    meshes: Vec<Mesh>,
    prolongations: Vec<Prolongation>,
    coarse_level: usize,
    refinement: Refinement,
}

impl Hierarchy {
    pub fn new(base: Mesh, refinement: Refinement) -> Self {
        Hierarchy {
            meshes: vec![base.with_level(0)],
            prolongations: Vec::new(),
            coarse_level: 0,
            refinement,
        }
    }

    /// `levels` meshes obtained by repeated regular refinement of `base`.
    pub fn uniform(base: Mesh, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidMeshParameter("hierarchy needs at least one level".into()));
        }
        let mut h = Hierarchy::new(base, Refinement::Uniform { beta: 2 });
        for _ in 1..levels {
            h.refine_uniformly()?;
        }
        Ok(h)
    }

    pub fn refine_uniformly(&mut self) -> Result<&Mesh> {
        let (fine, p) = refine_regular(self.finest())?;
        self.push(fine, p);
        Ok(self.finest())
    }

    pub fn refine_marked(&mut self, marked: &[usize]) -> Result<&Mesh> {
        let (fine, p) = bisect_marked(self.finest(), marked)?;
        self.push(fine, p);
        Ok(self.finest())
    }

    fn push(&mut self, fine: Mesh, p: Prolongation) {
        self.meshes.push(fine);
        self.prolongations.push(p);
    }

    /// The first `levels` levels as a hierarchy of their own.
    pub fn prefix(&self, levels: usize) -> Result<Hierarchy> {
        if levels == 0 || levels > self.num_levels() {
            return Err(Error::LevelOutOfRange {
                level: levels,
                count: self.num_levels(),
            });
        }
        if self.coarse_level >= levels {
            return Err(Error::LevelOutOfRange {
                level: self.coarse_level,
                count: levels,
            });
        }
        Ok(Hierarchy {
            meshes: self.meshes[..levels].to_vec(),
            prolongations: self.prolongations[..levels - 1].to_vec(),
            coarse_level: self.coarse_level,
            refinement: self.refinement,
        })
    }

    pub fn with_coarse_level(mut self, level: usize) -> Result<Self> {
        self.set_coarse_level(level)?;
        Ok(self)
    }

    pub fn set_coarse_level(&mut self, level: usize) -> Result<()> {
        self.check_level(level)?;
        self.coarse_level = level;
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        self.meshes.len()
    }

    pub fn mesh(&self, level: usize) -> Result<&Mesh> {
        self.check_level(level)?;
        Ok(&self.meshes[level])
    }

    pub fn meshes(&self) -> &[Mesh] {
        &self.meshes
    }

    pub fn finest(&self) -> &Mesh {
        self.meshes.last().expect("hierarchy is never empty")
    }

    pub fn coarse_level(&self) -> usize {
        self.coarse_level
    }

    pub fn refinement(&self) -> Refinement {
        self.refinement
    }

    /// Transfer map from `level` to `level + 1`.
    pub fn prolongation(&self, level: usize) -> Result<&Prolongation> {
        self.prolongations.get(level).ok_or(Error::LevelOutOfRange {
            level: level + 1,
            count: self.num_levels(),
        })
    }

    pub fn prolongations(&self) -> &[Prolongation] {
        &self.prolongations
    }

    /// Product of the per-level maps from `from` up to `to`.
    pub fn composite_prolongation(&self, from: usize, to: usize) -> Result<Prolongation> {
        self.check_level(from)?;
        self.check_level(to)?;
        if from > to {
            return Err(Error::LevelOutOfRange {
                level: from,
                count: to + 1,
            });
        }
        let mut p = Prolongation::identity(&self.meshes[from]);
        for level in from..to {
            p = p.then(&self.prolongations[level]);
        }
        Ok(p)
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level < self.num_levels() {
            Ok(())
        } else {
            Err(Error::LevelOutOfRange {
                level,
                count: self.num_levels(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_square;

    #[test]
    fn uniform_hierarchy_quadruples() {
        let h = Hierarchy::uniform(build_unit_square(2).unwrap(), 4).unwrap();
        for k in 1..h.num_levels() {
            let (c, f) = (&h.meshes()[k - 1], &h.meshes()[k]);
            assert_eq!(f.num_triangles(), 4 * c.num_triangles());
            assert_eq!(f.max_diameter(), 0.5 * c.max_diameter());
            assert_eq!(f.level_id(), k);
        }
    }

    #[test]
    fn composite_identity_and_errors() {
        let h = Hierarchy::uniform(build_unit_square(2).unwrap(), 3).unwrap();
        let p = h.composite_prolongation(1, 1).unwrap();
        assert_eq!(p.dofs.nrows(), h.meshes()[1].num_dofs());
        assert_eq!(p.dofs.nnz(), h.meshes()[1].num_dofs());
        assert!(h.composite_prolongation(0, 3).is_err());
        assert!(h.composite_prolongation(2, 1).is_err());
        assert!(h.clone().with_coarse_level(7).is_err());
    }
}
