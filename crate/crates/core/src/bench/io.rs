use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phantom::{to_final_frame, GrandModel};
use crate::volume::LabelGrid3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: String,
    /// Voxel coordinates, voxel centers at integers.
    pub position: [f64; 3],
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionSet {
    pub source: String,
    pub entries: Vec<Prediction>,
}

fn split_line(line: &str) -> Option<Vec<&str>> {
    let line = line.split('#').next().unwrap_or("").trim();
    (!line.is_empty()).then(|| line.split_whitespace().collect())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse { line, message: format!("not a number: {s:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("non-finite value {s:?}") });
    }
    Ok(v)
}

impl PredictionSet {
    /// `class x y z [score]` per line; blank lines and `#` comments skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let Some(cols) = split_line(line) else { continue };
            if cols.len() != 4 && cols.len() != 5 {
                return Err(Error::Parse { line: n + 1, message: format!("expected 4 or 5 columns, got {}", cols.len()) });
            }
            let position = [parse_f64(cols[1], n + 1)?, parse_f64(cols[2], n + 1)?, parse_f64(cols[3], n + 1)?];
            let score = cols.get(4).map(|s| parse_f64(s, n + 1)).transpose()?;
            entries.push(Prediction { class_id: cols[0].to_string(), position, score });
        }
        Ok(Self { source: source.to_string(), entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let source = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &source)
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|p| {
                let [x, y, z] = p.position;
                match p.score {
                    Some(s) => format!("{} {x} {y} {z} {s}\n", p.class_id),
                    None => format!("{} {x} {y} {z}\n", p.class_id),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParticle {
    /// Label of the particle in the occupancy mask.
    pub instance_id: u32,
    pub class_id: String,
    /// Voxel coordinates in the evaluation frame.
    pub position: [f64; 3],
}

/// Particles plus (canonically) their occupancy mask in the evaluation
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub particles: Vec<TruthParticle>,
    pub occupancy: Option<LabelGrid3>,
}

impl GroundTruth {
    /// Ground truth of a model in the frame binned `bin` times.
    pub fn from_model(model: &GrandModel, bin: usize) -> Result<Self> {
        let occupancy = if bin == 1 { model.occupancy_mask.clone() } else { model.occupancy_mask.bin_majority(bin)? };
        let particles = model
            .instances
            .iter()
            .map(|i| TruthParticle {
                instance_id: i.instance_id,
                class_id: i.class_id.clone(),
                position: to_final_frame(model, i.center, bin),
            })
            .collect();
        Ok(Self { particles, occupancy: Some(occupancy) })
    }

    /// `class x y z [phi theta psi]` per line; the n-th particle gets
    /// instance id n (from 1), matching the occupancy labels.
    pub fn parse(text: &str, occupancy: Option<LabelGrid3>) -> Result<Self> {
        let mut particles = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let Some(cols) = split_line(line) else { continue };
            if cols.len() != 4 && cols.len() != 7 {
                return Err(Error::Parse { line: n + 1, message: format!("expected 4 or 7 columns, got {}", cols.len()) });
            }
            for c in &cols[4..] {
                parse_f64(c, n + 1)?;
            }
            let position = [parse_f64(cols[1], n + 1)?, parse_f64(cols[2], n + 1)?, parse_f64(cols[3], n + 1)?];
            particles.push(TruthParticle {
                instance_id: particles.len() as u32 + 1,
                class_id: cols[0].to_string(),
                position,
            });
        }
        Ok(Self { particles, occupancy })
    }

    pub fn read(path: impl AsRef<Path>, occupancy: Option<impl AsRef<Path>>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let occupancy = occupancy.map(crate::mrc::read_labels).transpose()?;
        Self::parse(&text, occupancy)
    }

    pub fn particle(&self, instance_id: u32) -> Option<&TruthParticle> {
        // Ids are usually dense and ordered.
        let guess = instance_id.checked_sub(1).and_then(|i| self.particles.get(i as usize));
        match guess {
            Some(p) if p.instance_id == instance_id => Some(p),
            _ => self.particles.iter().find(|p| p.instance_id == instance_id),
        }
    }

    /// Distinct classes in order of first appearance.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.particles {
            if !out.contains(&p.class_id) {
                out.push(p.class_id.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_round_trip() {
        let text = "# header\n1bxn 1 2 3\n\nfiducial 4.5 5 6 0.25\n";
        let p = PredictionSet::parse(text, "x").unwrap();
        assert_eq!(p.entries.len(), 2);
        assert_eq!(p.entries[1].score, Some(0.25));
        assert_eq!(PredictionSet::parse(&p.to_text(), "x").unwrap(), p);
        assert!(PredictionSet::parse("a 1 2\n", "x").is_err());
        assert!(matches!(PredictionSet::parse("a 1 2 q\n", "x"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn truth_ids_follow_line_order() {
        let g = GroundTruth::parse("a 1 2 3 0 0 0\n# c\nb 4 5 6 10 20 30\n", None).unwrap();
        assert_eq!(g.particles[1].instance_id, 2);
        assert_eq!(g.particle(2).unwrap().class_id, "b");
        assert_eq!(g.classes(), vec!["a", "b"]);
        assert!(GroundTruth::parse("a 1 2 3 0\n", None).is_err());
    }
}
