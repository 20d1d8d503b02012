use std::io::Write as _;
use std::path::{Path, PathBuf};

use svs_core::alignment::{LabelUnits, PhonemeAlignment};
use svs_core::f0lab::F0Track;
use svs_core::pipeline::SongData;
use svs_core::score::{parse_musicxml, resolve_long_vowels, Score};
use svs_core::Seq;

use crate::config::{LabelFormat, Project};
use crate::error::{CliError, CliResult};

pub const SCORE_EXTENSIONS: [&str; 2] = ["musicxml", "xml"];

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
    let fail = |e: std::io::Error| CliError::data(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))
}

pub fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::data(format!("{what} directory {} does not exist", path.display())))
    }
}

pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::data(format!("{what} {} does not exist", path.display())))
    }
}

/// Song names (file stems) of the scores in `dir`, sorted.
pub fn list_scores(dir: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    require_dir(dir, "score")?;
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?
            .path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !SCORE_EXTENSIONS.contains(&ext) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.push((stem.to_string(), path));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::data(format!("no scores in {}", dir.display())));
    }
    Ok(out)
}

pub fn load_score(project: &Project, path: &Path) -> CliResult<Score> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let score = parse_musicxml(&bytes, &project.parse_options())
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    resolve_long_vowels(score, project.config.language).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn load_labels(project: &Project, path: &Path) -> CliResult<PhonemeAlignment> {
    let units = match project.config.label_format {
        LabelFormat::Frames => LabelUnits::Frames,
        LabelFormat::Htk => LabelUnits::Htk {
            frame_shift_s: project.config.frame_shift_s,
        },
    };
    PhonemeAlignment::parse(&read_text(path)?, units)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn load_f0(path: &Path) -> CliResult<F0Track> {
    F0Track::parse_hz(&read_text(path)?).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Whitespace-separated rows; `#` starts a comment line.
pub fn parse_table(text: &str) -> Result<Seq, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format!(
                    "line {}: {} columns, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                ));
            }
        }
        rows.push(row);
    }
    Ok(Seq::from_rows(&rows))
}

pub fn format_table(seq: &Seq, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str("# ");
        out.push_str(&h.join("\t"));
        out.push('\n');
    }
    for row in seq.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn load_table(path: &Path) -> CliResult<Seq> {
    parse_table(&read_text(path)?).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// What a command needs from each song.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    /// Score and labels; the F0 is a voiced placeholder.
    Timing,
    /// Score, labels, F0 and spectral features when configured.
    Acoustic,
}

/// Loads every song of the project. All referenced files are checked
/// before anything is parsed.
pub fn load_songs(project: &Project, need: Need) -> CliResult<Vec<SongData>> {
    let scores = list_scores(&project.scores_dir())?;
    let mut plan = Vec::with_capacity(scores.len());
    for (name, score_path) in scores {
        let lab = project.labels_dir().join(format!("{name}.lab"));
        require_file(&lab, "label file")?;
        let (f0, mgc) = if need == Need::Acoustic {
            let f0 = project.f0_dir().join(format!("{name}.f0"));
            require_file(&f0, "F0 file")?;
            let mgc = project.mgc_dir().map(|d| d.join(format!("{name}.mgc")));
            if let Some(m) = &mgc {
                require_file(m, "spectral feature file")?;
            }
            (Some(f0), mgc)
        } else {
            (None, None)
        };
        plan.push((name, score_path, lab, f0, mgc));
    }
    use rayon::prelude::*;
    plan.into_par_iter()
        .map(|(name, score_path, lab, f0, mgc)| {
            let score = load_score(project, &score_path)?;
            let alignment = load_labels(project, &lab)?;
            let f0 = match f0 {
                Some(p) => load_f0(&p)?,
                None => F0Track::voiced(vec![0.0; alignment.total_frames()])
                    .map_err(|e| CliError::data(e.to_string()))?,
            };
            let mgc = mgc.map(|p| load_table(&p)).transpose()?;
            let song = SongData {
                name: name.clone(),
                score,
                alignment,
                f0,
                mgc,
            };
            Ok(song)
        })
        .collect::<CliResult<Vec<_>>>()
}
