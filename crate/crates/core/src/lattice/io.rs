//! Text raster (PBM/PGM) and JSON encodings of [`GridSet`].

use serde::{Deserialize, Serialize};

use super::{GridSet, Lattice};
use crate::error::{Error, Result};

/// JSON record of a set: lattice geometry plus flat member indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSetRecord {
    pub dim: usize,
    pub h: f64,
    pub extents: Vec<usize>,
    pub origin: Vec<f64>,
    pub members: Vec<usize>,
}

impl From<&GridSet> for GridSetRecord {
    fn from(set: &GridSet) -> Self {
        let l = set.lattice();
        GridSetRecord {
            dim: l.dim(),
            h: l.h(),
            extents: l.extents().to_vec(),
            origin: l.origin().to_vec(),
            members: set.members(),
        }
    }
}

impl TryFrom<GridSetRecord> for GridSet {
    type Error = Error;

    fn try_from(rec: GridSetRecord) -> Result<GridSet> {
        let lattice = Lattice::new(rec.dim, rec.h, &rec.extents, &rec.origin)?;
        GridSet::from_flat(&lattice, rec.members)
    }
}

impl GridSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&GridSetRecord::from(self)).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<GridSet> {
        let rec: GridSetRecord = serde_json::from_str(text)?;
        GridSet::try_from(rec)
    }

    fn raster_header(&self, magic: &str) -> Result<(String, usize, usize)> {
        let l = self.lattice();
        if l.dim() != 2 {
            return Err(Error::InvalidParameter("raster output needs a two-dimensional set".into()));
        }
        let rows = l.extents()[0];
        let cols = l.extents()[1];
        let header =
            format!("{magic}\n# fracperim h={} origin={},{}\n{cols} {rows}\n", l.h(), l.origin()[0], l.origin()[1]);
        Ok((header, rows, cols))
    }

    /// Plain PBM (`P1`): one line of 0/1 per first-axis index, 1 marks a member.
    pub fn to_pbm(&self) -> Result<String> {
        let (mut out, rows, cols) = self.raster_header("P1")?;
        for r in 0..rows {
            for c in 0..cols {
                out.push(if self.contains_flat(r * cols + c) { '1' } else { '0' });
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Plain PGM (`P2`), members black (0) on white (255).
    pub fn to_pgm(&self) -> Result<String> {
        let (mut out, rows, cols) = self.raster_header("P2")?;
        out.push_str("255\n");
        for r in 0..rows {
            let line: Vec<&str> =
                (0..cols).map(|c| if self.contains_flat(r * cols + c) { "0" } else { "255" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses a PBM or PGM written by [`GridSet::to_pbm`] / [`GridSet::to_pgm`].
    /// Without the geometry comment the lattice defaults to `h = 1` at the origin.
    pub fn from_raster(text: &str) -> Result<GridSet> {
        let mut h = 1.0;
        let mut origin = [0.0, 0.0];
        let mut tokens: Vec<&str> = Vec::new();
        for line in text.lines() {
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(v) = field.strip_prefix("h=") {
                        h = v.parse().map_err(|_| Error::Parse(format!("bad h '{v}'")))?;
                    } else if let Some(v) = field.strip_prefix("origin=") {
                        let parts: Vec<&str> = v.split(',').collect();
                        if parts.len() != 2 {
                            return Err(Error::Parse(format!("bad origin '{v}'")));
                        }
                        for (o, p) in origin.iter_mut().zip(parts) {
                            *o = p.parse().map_err(|_| Error::Parse(format!("bad origin '{v}'")))?;
                        }
                    }
                }
                continue;
            }
            tokens.extend(line.split_whitespace());
        }
        let magic = *tokens.first().ok_or_else(|| Error::Parse("empty raster".into()))?;
        let parse = |t: Option<&&str>| -> Result<usize> {
            t.ok_or_else(|| Error::Parse("truncated header".into()))?
                .parse()
                .map_err(|_| Error::Parse("bad header field".into()))
        };
        let cols = parse(tokens.get(1))?;
        let rows = parse(tokens.get(2))?;
        let lattice = Lattice::new(2, h, &[rows, cols], &origin)?;
        let mut set = GridSet::empty(&lattice);
        match magic {
            "P1" => {
                let digits: Vec<char> = tokens[3..].iter().flat_map(|t| t.chars()).collect();
                if digits.len() != rows * cols {
                    return Err(Error::Parse(format!("expected {} pixels, found {}", rows * cols, digits.len())));
                }
                for (i, d) in digits.into_iter().enumerate() {
                    match d {
                        '1' => {
                            set.insert(i);
                        }
                        '0' => {}
                        other => return Err(Error::Parse(format!("bad pixel '{other}'"))),
                    }
                }
            }
            "P2" => {
                let pixels = &tokens[4.min(tokens.len())..];
                if pixels.len() != rows * cols {
                    return Err(Error::Parse(format!("expected {} pixels, found {}", rows * cols, pixels.len())));
                }
                for (i, p) in pixels.iter().enumerate() {
                    let v: u32 = p.parse().map_err(|_| Error::Parse(format!("bad pixel '{p}'")))?;
                    if v == 0 {
                        set.insert(i);
                    }
                }
            }
            other => return Err(Error::Parse(format!("unsupported raster magic '{other}'"))),
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pbm_layout() {
        let l = Lattice::new(2, 0.5, &[2, 3], &[-1.0, 0.25]).unwrap();
        let s = GridSet::from_cells(&l, [[0, 1, 0], [1, 2, 0]]).unwrap();
        assert_eq!(s.to_pbm().unwrap(), "P1\n# fracperim h=0.5 origin=-1,0.25\n3 2\n010\n001\n");
        let back = GridSet::from_raster(&s.to_pgm().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn raster_rejects_other_dimensions_and_garbage() {
        let l = Lattice::cube(3, 1.0, 2, 0.0).unwrap();
        assert!(GridSet::empty(&l).to_pbm().is_err());
        assert!(GridSet::from_raster("P1\n2 2\n01\n1").is_err());
        assert!(GridSet::from_raster("P7\n1 1\n1\n").is_err());
    }

    proptest! {
        #[test]
        fn encodings_round_trip_bit_exactly(
            rows in 1usize..9, cols in 1usize..9,
            h in 1e-3f64..10.0, ox in -10.0f64..10.0, oy in -10.0f64..10.0,
            seed in proptest::collection::vec(any::<bool>(), 81),
        ) {
            let l = Lattice::new(2, h, &[rows, cols], &[ox, oy]).unwrap();
            let cells = (0..l.len()).filter(|&i| seed[i]);
            let s = GridSet::from_flat(&l, cells).unwrap();
            prop_assert_eq!(GridSet::from_json(&s.to_json()).unwrap(), s.clone());
            prop_assert_eq!(GridSet::from_raster(&s.to_pbm().unwrap()).unwrap(), s.clone());
            prop_assert_eq!(GridSet::from_raster(&s.to_pgm().unwrap()).unwrap(), s);
        }
    }
}
