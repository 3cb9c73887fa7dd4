//! Structure-file parsing: a fixed-column PDB subset and a plain
//! `element x y z [occupancy]` per-line format.
//!
//! PDB support covers ATOM/HETATM records of the first model, alternate
//! location blank or `A`. The element comes from columns 77–78 and falls
//! back to the atom name (columns 13–16).

use super::table::{normalize_symbol, ScatteringTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub element: String,
    /// Å.
    pub position: [f64; 3],
    pub occupancy: f64,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Drop water residues (HOH, WAT, DOD, H2O).
    pub skip_solvent: bool,
    pub skip_hydrogens: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { skip_solvent: true, skip_hydrogens: false }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedStructure {
    pub atoms: Vec<AtomRecord>,
    pub warnings: Vec<String>,
}

impl ParsedStructure {
    /// Distinct element symbols the table has no entry for.
    pub fn unknown_elements(&self, table: &ScatteringTable) -> Vec<String> {
        let mut out: Vec<String> = self
            .atoms
            .iter()
            .filter(|a| !table.contains(&a.element))
            .map(|a| a.element.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Sum of atomic masses weighted by occupancy, kDa. Unknown elements
    /// contribute nothing.
    pub fn molecular_weight_kda(&self, table: &ScatteringTable) -> f64 {
        self.atoms
            .iter()
            .filter_map(|a| table.get(&a.element).map(|p| p.mass * a.occupancy))
            .sum::<f64>()
            / 1000.0
    }
}

const SOLVENT: [&str; 4] = ["HOH", "WAT", "DOD", "H2O"];

const TWO_LETTER: [&str; 40] = [
    "He", "Li", "Be", "Ne", "Na", "Mg", "Al", "Si", "Cl", "Ar", "Ca", "Sc", "Ti", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Mo", "Ru", "Rh", "Pd", "Ag", "Cd", "Sn", "Sb", "Xe", "Cs", "Pt", "Au",
];

/// Parses either format, detected from the presence of ATOM/HETATM records.
pub fn parse_structure(text: &str, opts: &ParseOptions) -> Result<ParsedStructure> {
    let is_pdb = text.lines().any(|l| l.starts_with("ATOM") || l.starts_with("HETATM"));
    let mut parsed = if is_pdb { parse_pdb(text, opts)? } else { parse_xyz(text, opts)? };
    if parsed.atoms.is_empty() {
        parsed.warnings.push("structure contains no atoms".into());
    }
    Ok(parsed)
}

fn column(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        ""
    } else {
        line.get(start..end).unwrap_or("")
    }
}

fn element_from_name(name: &str) -> String {
    // Columns 13-14 hold a right-justified element symbol; a letter in
    // column 13 means a two-letter element unless it starts an organic one.
    let b = name.as_bytes();
    if b.len() >= 2 && b[0].is_ascii_alphabetic() && b[1].is_ascii_alphabetic() {
        let two = normalize_symbol(&name[..2]);
        if TWO_LETTER.contains(&two.as_str()) && !matches!(b[0], b'H' | b'C' | b'N' | b'O' | b'S' | b'P') {
            return two;
        }
        return normalize_symbol(&name[..1]);
    }
    name.chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase().to_string())
        .unwrap_or_default()
}

fn parse_pdb(text: &str, opts: &ParseOptions) -> Result<ParsedStructure> {
    let mut out = ParsedStructure::default();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.starts_with("ENDMDL") {
            break;
        }
        if !(line.starts_with("ATOM") || line.starts_with("HETATM")) {
            continue;
        }
        let alt = column(line, 16, 17).trim();
        if !(alt.is_empty() || alt == "A") {
            continue;
        }
        let resname = column(line, 17, 20).trim();
        if opts.skip_solvent && SOLVENT.contains(&resname) {
            continue;
        }
        let coord = |s: usize, e: usize, axis: char| -> Result<f64> {
            let field = column(line, s, e).trim();
            field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("bad {axis} coordinate {field:?}"),
            })
        };
        let position = [coord(30, 38, 'x')?, coord(38, 46, 'y')?, coord(46, 54, 'z')?];
        let occ_field = column(line, 54, 60).trim();
        let occupancy = if occ_field.is_empty() {
            1.0
        } else {
            occ_field.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad occupancy {occ_field:?}"),
            })?
        };
        let mut element = normalize_symbol(column(line, 76, 78));
        if element.is_empty() || !element.chars().all(|c| c.is_ascii_alphabetic()) {
            element = element_from_name(column(line, 12, 16));
        }
        if element.is_empty() {
            out.warnings.push(format!("line {lineno}: could not determine element"));
            element = "X".into();
        }
        if opts.skip_hydrogens && element == "H" {
            continue;
        }
        out.atoms.push(AtomRecord { element, position, occupancy: occupancy.clamp(0.0, 1.0) });
    }
    Ok(out)
}

fn parse_xyz(text: &str, opts: &ParseOptions) -> Result<ParsedStructure> {
    let mut out = ParsedStructure::default();
    let mut lines = text.lines().enumerate().peekable();
    // Classic XYZ: atom count, then a free-form comment line.
    while let Some((_, l)) = lines.peek() {
        if l.trim().is_empty() {
            lines.next();
        } else {
            break;
        }
    }
    if let Some((_, l)) = lines.peek() {
        if l.trim().parse::<usize>().is_ok() {
            lines.next();
            lines.next();
        }
    }
    for (n, line) in lines {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 4 {
            return Err(Error::Parse { line: n + 1, message: format!("expected `element x y z`, got {line:?}") });
        }
        let mut p = [0.0; 3];
        for (a, c) in cols[1..4].iter().enumerate() {
            p[a] = c.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("bad coordinate {c:?}"),
            })?;
        }
        let occupancy = match cols.get(4) {
            Some(c) => c.parse::<f64>().map_err(|_| Error::Parse { line: n + 1, message: format!("bad occupancy {c:?}") })?,
            None => 1.0,
        };
        let element = normalize_symbol(cols[0]);
        if opts.skip_hydrogens && element == "H" {
            continue;
        }
        out.atoms.push(AtomRecord { element, position: p, occupancy: occupancy.clamp(0.0, 1.0) });
    }
    Ok(out)
}

/// Writes atoms as PDB HETATM/ATOM lines the parser reads back.
pub fn to_pdb(atoms: &[AtomRecord]) -> String {
    let mut s = String::new();
    for (i, a) in atoms.iter().enumerate() {
        let name = format!(" {:<3}", a.element.to_uppercase());
        s.push_str(&format!(
            "ATOM  {:>5} {:<4} UNK A{:>4}    {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}\n",
            (i + 1) % 100_000,
            name,
            (i / 10 + 1) % 10_000,
            a.position[0],
            a.position[1],
            a.position[2],
            a.occupancy,
            0.0,
            a.element.to_uppercase()
        ));
    }
    s.push_str("END\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
HEADER    TEST
ATOM      1  N   MET A   1      11.104   6.134  -6.504  1.00  0.00           N
ATOM      2  CA  MET A   1      11.639   6.071  -5.147  1.00  0.00           C
HETATM    3  O   HOH A 101       1.000   2.000   3.000  1.00  0.00           O
END
";

    #[test]
    fn single_carbon() {
        let line = "ATOM      1  C   GLY A   1       0.000   0.000   0.000  1.00  0.00           C\n";
        let p = parse_structure(line, &ParseOptions::default()).unwrap();
        assert_eq!(p.atoms.len(), 1);
        assert_eq!(p.atoms[0].element, "C");
        assert_eq!(p.atoms[0].position, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn solvent_filtering() {
        let p = parse_structure(FIXTURE, &ParseOptions::default()).unwrap();
        assert_eq!(p.atoms.len(), 2);
        assert_eq!(p.atoms[1].element, "C");
        let all = parse_structure(FIXTURE, &ParseOptions { skip_solvent: false, ..Default::default() }).unwrap();
        assert_eq!(all.atoms.len(), 3);
    }

    #[test]
    fn empty_file_warns() {
        let p = parse_structure("", &ParseOptions::default()).unwrap();
        assert!(p.atoms.is_empty());
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn malformed_coordinate_reports_line() {
        let text = "REMARK\nATOM      1  C   GLY A   1       0.000   abc     0.000  1.00  0.00           C\n";
        match parse_structure(text, &ParseOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn element_fallback_from_atom_name() {
        let no_element = "HETATM    1 FE   HEM A   1       1.000   1.000   1.000  1.00  0.00\n\
                          ATOM      2  CA  ALA A   2       2.000   1.000   1.000  1.00  0.00\n\
                          ATOM      3 HB12 ALA A   2       3.000   1.000   1.000  1.00  0.00\n";
        let p = parse_structure(no_element, &ParseOptions::default()).unwrap();
        let els: Vec<&str> = p.atoms.iter().map(|a| a.element.as_str()).collect();
        assert_eq!(els, ["Fe", "C", "H"]);
    }

    #[test]
    fn unknown_elements_are_kept_and_reported() {
        let text = "ATOM      1 XE   XEN A   1       0.000   0.000   0.000  1.00  0.00          XE\n";
        let p = parse_structure(text, &ParseOptions::default()).unwrap();
        assert_eq!(p.atoms.len(), 1);
        let table = ScatteringTable::standard().unwrap();
        assert_eq!(p.unknown_elements(&table), vec!["Xe".to_string()]);
    }

    #[test]
    fn xyz_format() {
        let text = "3\nwater\nO 0 0 0\nH 0.96 0 0\nH -0.24 0.93 0 0.5\n";
        let p = parse_structure(text, &ParseOptions::default()).unwrap();
        assert_eq!(p.atoms.len(), 3);
        assert_eq!(p.atoms[2].occupancy, 0.5);
        let plain = "# comment\nC 1 2 3\nN 4 5 6 # trailing\n";
        assert_eq!(parse_structure(plain, &ParseOptions::default()).unwrap().atoms.len(), 2);
        assert!(parse_structure("C 1 2\n", &ParseOptions::default()).is_err());
    }

    #[test]
    fn pdb_writer_round_trips() {
        let atoms = vec![
            AtomRecord { element: "C".into(), position: [1.5, -2.25, 3.0], occupancy: 1.0 },
            AtomRecord { element: "Fe".into(), position: [-10.0, 0.125, 99.5], occupancy: 0.5 },
        ];
        let back = parse_structure(&to_pdb(&atoms), &ParseOptions::default()).unwrap();
        assert_eq!(back.atoms, atoms);
    }
}
