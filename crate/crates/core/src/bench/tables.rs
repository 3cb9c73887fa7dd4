//! Published reference values: the particle catalog, the test-tomogram
//! class counts, and the localization and classification results of the
//! compared methods.

/// Particles in the test tomogram as stated in the text; the recall
/// denominator of the published localization table.
pub const TEST_PARTICLES: usize = 1571;

/// Sum of the per-class test counts, and TP + FN in most rows of the
/// localization table. Differs from [`TEST_PARTICLES`] by 6.
pub const TEST_COUNTS_TOTAL: usize = 1565;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogRow {
    pub pdb: &'static str,
    pub name: &'static str,
    /// kDa.
    pub molecular_weight: f64,
    /// nm³.
    pub volume: f64,
    /// nm².
    pub area: f64,
    pub sphericity: f64,
    /// nm.
    pub effective_radius: f64,
}

macro_rules! row {
    ($pdb:literal, $name:literal, $mw:literal, $v:literal, $a:literal, $s:literal, $r:literal) => {
        CatalogRow {
            pdb: $pdb,
            name: $name,
            molecular_weight: $mw,
            volume: $v,
            area: $a,
            sphericity: $s,
            effective_radius: $r,
        }
    };
}

/// Sorted by molecular weight.
pub const CATALOG: [CatalogRow; 12] = [
    row!("1s3x", "Hsp70 ATPase", 42.75, 90.82, 109.8, 0.89, 2.481),
    row!("3qm1", "LJ0536 S106A", 62.62, 127.9, 137.6, 0.892, 2.789),
    row!("3gl1", "Ssb1, Hsp70", 84.61, 196.5, 191.2, 0.855, 3.083),
    row!("3h84", "GET3", 158.08, 347.0, 370.9, 0.644, 2.807),
    row!("2cg9", "Hsp90-Sba1", 188.73, 401.2, 358.4, 0.734, 3.358),
    row!("3d2f", "Sse1p, Hsp70", 236.11, 516.0, 459.6, 0.677, 3.368),
    row!("1u6g", "Cand1-Cul1-Roc1", 238.82, 499.3, 450.2, 0.676, 3.327),
    row!("3cf3", "P97/vcp", 541.74, 1136.0, 745.2, 0.707, 4.573),
    row!("1bxn", "Rubisco", 559.96, 1021.0, 583.4, 0.84, 5.25),
    row!("1qvr", "ClpB", 593.36, 1354.0, 1063.0, 0.557, 3.821),
    row!("4cr2", "26S proteasome", 1309.28, 2675.0, 1846.0, 0.505, 4.347),
    row!("5mrc", "Yeast mito ribosome", 3325.59, 6372.0, 3161.0, 0.526, 6.047),
];

pub fn catalog_row(pdb: &str) -> Option<&'static CatalogRow> {
    CATALOG.iter().find(|r| r.pdb == pdb)
}

/// Class columns of the per-class table: the 12 proteins by weight, then
/// the gold fiducials.
pub const CLASS_COLUMNS: [&str; 13] =
    ["1s3x", "3qm1", "3gl1", "3h84", "2cg9", "3d2f", "1u6g", "3cf3", "1bxn", "1qvr", "4cr2", "5mrc", "fiducial"];

/// Particles per class in the test tomogram, in [`CLASS_COLUMNS`] order.
pub const TEST_COUNTS: [usize; 13] = [122, 120, 123, 144, 125, 140, 143, 139, 135, 127, 115, 121, 11];

/// One row of the localization table as printed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationRow {
    pub method: &'static str,
    pub rr: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub mh: usize,
    pub ad: f64,
    pub recall: f64,
    pub precision: f64,
    pub miss_rate: f64,
    pub f1: f64,
}

macro_rules! loc {
    ($m:literal, $rr:literal, $tp:literal, $fp:literal, $fn_:literal, $mh:literal, $ad:literal, $r:literal, $p:literal, $mr:literal, $f1:literal) => {
        LocalizationRow {
            method: $m,
            rr: $rr,
            tp: $tp,
            fp: $fp,
            fn_: $fn_,
            mh: $mh,
            ad: $ad,
            recall: $r,
            precision: $p,
            miss_rate: $mr,
            f1: $f1,
        }
    };
}

pub const LOCALIZATION: [LocalizationRow; 8] = [
    loc!("URFinder", 1969, 1298, 377, 267, 149, 1.84, 0.826, 0.659, 0.174, 0.733),
    loc!("DeepFinder", 1567, 1362, 64, 203, 20, 2.22, 0.867, 0.869, 0.133, 0.868),
    loc!("U-CLSTM", 1460, 1253, 49, 312, 44, 2.13, 0.798, 0.858, 0.202, 0.827),
    loc!("MC DS Net", 1760, 1415, 239, 150, 56, 1.59, 0.901, 0.804, 0.099, 0.850),
    loc!("YOPO", 1627, 1224, 232, 341, 14, 1.66, 0.720, 0.752, 0.221, 0.765),
    loc!("CFN", 1765, 1364, 239, 201, 20, 1.52, 0.868, 0.773, 0.132, 0.818),
    loc!("TM-F", 1772, 963, 295, 601, 17, 2.65, 0.613, 0.543, 0.387, 0.576),
    loc!("TM", 4195, 1073, 583, 492, 716, 2.62, 0.683, 0.256, 0.317, 0.372),
];

/// Per-class F1 in [`CLASS_COLUMNS`] order.
pub const CLASS_F1: [(&str, [f64; 13]); 8] = [
    ("URFinder", [0.000, 0.423, 0.453, 0.600, 0.542, 0.672, 0.673, 0.867, 0.967, 0.860, 0.926, 0.954, 0.429]),
    ("DeepFinder", [0.402, 0.481, 0.517, 0.701, 0.716, 0.766, 0.737, 0.964, 0.989, 0.953, 0.974, 0.996, 1.000]),
    ("U-CLSTM", [0.277, 0.415, 0.389, 0.561, 0.511, 0.651, 0.566, 0.946, 0.989, 0.903, 0.991, 1.000, 1.000]),
    ("MC DS Net", [0.316, 0.487, 0.603, 0.783, 0.782, 0.791, 0.797, 0.956, 0.985, 0.934, 0.979, 1.000, 1.000]),
    ("YOPO", [0.203, 0.148, 0.471, 0.601, 0.626, 0.627, 0.613, 0.884, 0.938, 0.920, 0.983, 0.966, 0.952]),
    ("CFN", [0.250, 0.511, 0.613, 0.768, 0.714, 0.761, 0.731, 0.971, 0.996, 0.969, 0.996, 1.000, 1.000]),
    ("TM-F", [0.040, 0.189, 0.200, 0.282, 0.308, 0.439, 0.129, 0.592, 0.962, 0.513, 0.827, 0.857, 0.900]),
    ("TM", [0.054, 0.197, 0.266, 0.302, 0.345, 0.452, 0.133, 0.615, 0.966, 0.545, 0.950, 0.857, 0.900]),
];

/// Size groups by molecular weight, kDa: `[lower, upper)`.
pub const SIZE_GROUPS: [(&str, f64, f64); 3] =
    [("Small", 0.0, 200.0), ("Medium", 200.0, 600.0), ("Large", 600.0, f64::INFINITY)];

/// Published group means (Small, Medium, Large).
pub const GROUP_F1: [(&str, [f64; 3]); 8] = [
    ("URFinder", [0.404, 0.808, 0.94]),
    ("DeepFinder", [0.563, 0.882, 0.985]),
    ("U-CLSTM", [0.431, 0.811, 0.996]),
    ("MC DS Net", [0.594, 0.893, 0.989]),
    ("YOPO", [0.41, 0.796, 0.974]),
    ("CFN", [0.571, 0.886, 0.998]),
    ("TM-F", [0.204, 0.527, 0.842]),
    ("TM", [0.233, 0.542, 0.903]),
];

/// Size group of a molecular weight (kDa).
pub fn size_group(mw: f64) -> Option<&'static str> {
    SIZE_GROUPS.iter().find(|(_, lo, hi)| mw >= *lo && mw < *hi).map(|g| g.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts_disagree_with_stated_total() {
        assert_eq!(TEST_COUNTS.iter().sum::<usize>(), TEST_COUNTS_TOTAL);
        assert_ne!(TEST_COUNTS_TOTAL, TEST_PARTICLES);
        let rows = LOCALIZATION.iter().filter(|r| r.tp + r.fn_ == TEST_COUNTS_TOTAL).count();
        assert!(rows >= 6, "{rows}");
    }

    #[test]
    fn catalog_sorted_by_weight_and_grouped() {
        assert!(CATALOG.windows(2).all(|w| w[0].molecular_weight < w[1].molecular_weight));
        let groups: Vec<_> = CATALOG.iter().map(|r| size_group(r.molecular_weight).unwrap()).collect();
        assert_eq!(groups.iter().filter(|g| **g == "Small").count(), 5);
        assert_eq!(groups.iter().filter(|g| **g == "Medium").count(), 5);
        assert_eq!(groups.iter().filter(|g| **g == "Large").count(), 2);
        for (r, c) in CATALOG.iter().zip(CLASS_COLUMNS) {
            assert_eq!(r.pdb, c);
        }
    }
}
