//! JSON file formats: balls, maps, and verification reports.
//!
//! Rationals travel as strings ("p/q" or a bare integer) so nothing is ever
//! rounded. Serialization is canonical: lowest-terms rationals, fixed field
//! order, two-space indentation, trailing newline. Parsing a file and
//! serializing it again reproduces the canonical form byte for byte, and
//! unknown fields are rejected rather than ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ball::PolyBall;
use crate::error::{Error, Result};
use crate::linalg::{format_rational, parse_rational, Matrix, Rational, Vector};
use crate::maps::{MapKind, SphereMap};

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn matrix_to_strings(m: &Matrix) -> Vec<Vec<String>> {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| format_rational(m.at(i, j))).collect())
        .collect()
}

fn strings_to_matrix(rows: &[Vec<String>]) -> Result<Matrix> {
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Parse("matrix rows must be nonempty and equal length".into()));
    }
    let parsed: Vec<Vec<Rational>> = rows
        .iter()
        .map(|r| r.iter().map(|s| parse_rational(s)).collect())
        .collect::<Result<_>>()?;
    Ok(Matrix::from_rows(parsed))
}

/// On-disk form of a ball: its dimension and vertex coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallFile {
    pub dim: usize,
    pub vertices: Vec<Vec<String>>,
}

impl BallFile {
    pub fn from_ball(ball: &PolyBall) -> BallFile {
        BallFile {
            dim: ball.dim,
            vertices: ball
                .vertices
                .iter()
                .map(|v| v.0.iter().map(format_rational).collect())
                .collect(),
        }
    }

    pub fn to_ball(&self) -> Result<PolyBall> {
        let vertices: Vec<Vector> = self
            .vertices
            .iter()
            .map(|coords| {
                coords
                    .iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<Rational>>>()
                    .map(Vector)
            })
            .collect::<Result<_>>()?;
        PolyBall::from_vertices(self.dim, vertices)
    }
}

pub fn parse_ball(path: &Path) -> Result<PolyBall> {
    let file: BallFile = from_json(&read_file(path)?, "ball file")?;
    file.to_ball()
}

pub fn serialize_ball(ball: &PolyBall, path: &Path) -> Result<()> {
    write_file(path, &canonical_json(&BallFile::from_ball(ball)))
}

/// One facet's matrix inside a piecewise map file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceEntry {
    pub facet: usize,
    pub matrix: Vec<Vec<String>>,
}

/// On-disk form of a sphere map. `kind` selects which payload field must be
/// present: "linear" carries `matrix`, "pwl" carries `pieces`. Opaque
/// evaluator maps have no file form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceEntry>>,
}

impl MapFile {
    pub fn from_map(map: &SphereMap) -> Result<MapFile> {
        match &map.kind {
            MapKind::Linear(a) => Ok(MapFile {
                kind: "linear".into(),
                matrix: Some(matrix_to_strings(a)),
                pieces: None,
            }),
            MapKind::Pwl(pieces) => Ok(MapFile {
                kind: "pwl".into(),
                matrix: None,
                pieces: Some(
                    pieces
                        .iter()
                        .map(|(&facet, m)| PieceEntry {
                            facet,
                            matrix: matrix_to_strings(m),
                        })
                        .collect(),
                ),
            }),
            MapKind::Oracle { .. } => Err(Error::Validation(
                "oracle-backed maps cannot be serialized".into(),
            )),
        }
    }

    pub fn to_map(&self, source: PolyBall, target: PolyBall) -> Result<SphereMap> {
        match self.kind.as_str() {
            "linear" => {
                if self.pieces.is_some() {
                    return Err(Error::Validation("linear map file must not carry pieces".into()));
                }
                let rows = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::Validation("linear map file needs a matrix".into()))?;
                SphereMap::linear(source, target, strings_to_matrix(rows)?)
            }
            "pwl" => {
                if self.matrix.is_some() {
                    return Err(Error::Validation("pwl map file must not carry a matrix".into()));
                }
                let entries = self
                    .pieces
                    .as_ref()
                    .ok_or_else(|| Error::Validation("pwl map file needs pieces".into()))?;
                let mut pieces: BTreeMap<usize, Matrix> = BTreeMap::new();
                for e in entries {
                    if pieces.insert(e.facet, strings_to_matrix(&e.matrix)?).is_some() {
                        return Err(Error::Validation(format!(
                            "facet {} appears twice in the map file",
                            e.facet
                        )));
                    }
                }
                SphereMap::pwl(source, target, pieces)
            }
            other => Err(Error::Parse(format!(
                "unknown map kind {other:?}, expected \"linear\" or \"pwl\""
            ))),
        }
    }
}

pub fn parse_map(path: &Path, source: PolyBall, target: PolyBall) -> Result<SphereMap> {
    let file: MapFile = from_json(&read_file(path)?, "map file")?;
    file.to_map(source, target)
}

pub fn serialize_map(map: &SphereMap, path: &Path) -> Result<()> {
    write_file(path, &canonical_json(&MapFile::from_map(map)?))
}

/// The step schedule a report was produced under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub depth: usize,
    pub window: usize,
    pub tolerance: String,
}

/// One verified property: worst residual over all instances against its
/// pass threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEntry {
    pub name: String,
    pub instances: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Full output of `verify lemmas`. `overall_pass` is true exactly when
/// every entry passes; the constructor enforces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub source: String,
    pub target: String,
    pub map_kind: String,
    pub seed: u64,
    pub instances: usize,
    pub schedule: ScheduleFile,
    pub entries: Vec<ReportEntry>,
    pub overall_pass: bool,
}

impl VerificationReport {
    pub fn new(
        source: String,
        target: String,
        map_kind: String,
        seed: u64,
        instances: usize,
        schedule: ScheduleFile,
        entries: Vec<ReportEntry>,
    ) -> VerificationReport {
        let overall_pass = entries.iter().all(|e| e.pass);
        VerificationReport {
            source,
            target,
            map_kind,
            seed,
            instances,
            schedule,
            entries,
            overall_pass,
        }
    }

    pub fn canonical_json(&self) -> String {
        canonical_json(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.canonical_json())
    }
}

pub fn parse_report(path: &Path) -> Result<VerificationReport> {
    from_json(&read_file(path)?, "report file")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::linalg::rat;

    #[test]
    fn ball_files_round_trip_exactly() {
        for (_, ball) in corpus::all_named() {
            let file = BallFile::from_ball(&ball);
            let json = canonical_json(&file);
            let reparsed: BallFile = from_json(&json, "ball file").unwrap();
            assert_eq!(reparsed, file);
            assert_eq!(canonical_json(&reparsed), json);
            assert_eq!(reparsed.to_ball().unwrap(), ball);
        }
    }

    #[test]
    fn rationals_with_zero_denominators_are_rejected() {
        let file = BallFile {
            dim: 2,
            vertices: vec![vec!["1/0".into(), "1".into()]],
        };
        assert!(matches!(file.to_ball(), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"dim": 2, "vertices": [], "extra": 1}"#;
        assert!(matches!(
            from_json::<BallFile>(text, "ball file"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn map_files_round_trip_for_both_kinds() {
        let linear = corpus::rotation_square();
        let file = MapFile::from_map(&linear).unwrap();
        let json = canonical_json(&file);
        let reparsed: MapFile = from_json(&json, "map file").unwrap();
        let back = reparsed
            .to_map(linear.source.clone(), linear.target.clone())
            .unwrap();
        assert_eq!(back.matrix(), linear.matrix());
        assert_eq!(back.source, linear.source);
        assert_eq!(canonical_json(&reparsed), json);

        let pwl = corpus::ridge_defect_square();
        let file = MapFile::from_map(&pwl).unwrap();
        let reparsed: MapFile = from_json(&canonical_json(&file), "map file").unwrap();
        let back = reparsed
            .to_map(pwl.source.clone(), pwl.target.clone())
            .unwrap();
        assert_eq!(back.pieces(), pwl.pieces());
        assert_eq!(file.pieces.as_ref().unwrap().len(), 4);
        assert_eq!(file.pieces.as_ref().unwrap()[0].matrix[0][1], "0");
    }

    #[test]
    fn oracle_maps_have_no_file_form() {
        let f = corpus::constant_map(corpus::square());
        assert!(matches!(MapFile::from_map(&f), Err(Error::Validation(_))));
    }

    #[test]
    fn kind_and_payload_must_agree() {
        let sq = corpus::square;
        let no_matrix = MapFile {
            kind: "linear".into(),
            matrix: None,
            pieces: None,
        };
        assert!(matches!(
            no_matrix.to_map(sq(), sq()),
            Err(Error::Validation(_))
        ));
        let bad_kind = MapFile {
            kind: "affine".into(),
            matrix: None,
            pieces: None,
        };
        assert!(matches!(bad_kind.to_map(sq(), sq()), Err(Error::Parse(_))));
        let mixed = MapFile {
            kind: "pwl".into(),
            matrix: Some(vec![vec!["1".into()]]),
            pieces: Some(vec![]),
        };
        assert!(matches!(mixed.to_map(sq(), sq()), Err(Error::Validation(_))));
    }

    #[test]
    fn reports_serialize_deterministically() {
        let entry = ReportEntry {
            name: "antipodality".into(),
            instances: 100,
            max_residual: 0.0,
            tolerance: 1e-8,
            pass: true,
        };
        let report = VerificationReport::new(
            "square".into(),
            "square".into(),
            "linear".into(),
            7,
            100,
            ScheduleFile {
                depth: 30,
                window: 3,
                tolerance: format_rational(&rat(1, 1_000_000_000)),
            },
            vec![entry.clone(), entry],
        );
        assert!(report.overall_pass);
        assert_eq!(report.canonical_json(), report.canonical_json());
        let reparsed: VerificationReport =
            from_json(&report.canonical_json(), "report file").unwrap();
        assert_eq!(reparsed, report);

        let mut failing = report.entries.clone();
        failing[0].pass = false;
        let report = VerificationReport::new(
            "square".into(),
            "square".into(),
            "linear".into(),
            7,
            100,
            report.schedule.clone(),
            failing,
        );
        assert!(!report.overall_pass);
    }

    #[test]
    fn missing_files_surface_io_errors() {
        let missing = Path::new("/nonexistent/ball.json");
        assert!(matches!(parse_ball(missing), Err(Error::Io(_))));
    }
}
