//! Output directories with a hashed manifest, and minimal SVG rendering.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use ccbm::mesh::{Mesh, Rect};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::CliError;

/// A directory whose written files are recorded for the manifest.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct FileEntry<'a> {
    path: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    rerun: String,
    config: &'a ScenarioConfig,
    files: Vec<FileEntry<'a>>,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, CliError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, files: Vec::new() })
    }

    pub fn sub(&self, name: &str) -> Result<Self, CliError> {
        Self::create(self.root.join(name))
    }

    /// Writes `name` through `body` and records it.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
    {
        let path = self.root.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_str(name, &text)
    }

    /// Stores the resolved config next to the outputs and a manifest with
    /// the hash of every file written here.
    pub fn finish(mut self, command: &str, cfg: &ScenarioConfig) -> Result<(), CliError> {
        self.write_str("config.toml", &cfg.to_toml())?;
        let mut entries = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let path = self.root.join(name);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            entries.push(FileEntry { path: name, sha256: hex::encode(Sha256::digest(&bytes)) });
        }
        let manifest = Manifest {
            tool: "ccbm",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.noise.seed,
            rerun: format!("ccbm {command} --config config.toml --out ."),
            config: cfg,
            files: entries,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

const SIZE: f64 = 600.0;

/// SVG canvas mapping the domain onto a square viewport, y pointing up.
pub struct Svg {
    bounds: Rect,
    body: String,
}

impl Svg {
    pub fn new(bounds: Rect) -> Self {
        Self { bounds, body: String::new() }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let b = self.bounds;
        ((p[0] - b.xmin) / b.width() * SIZE, (b.ymax - p[1]) / b.height() * SIZE)
    }

    /// Triangles filled by the mean of their vertex values.
    pub fn field(&mut self, mesh: &Mesh, values: &[f64]) {
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for t in mesh.triangles() {
            let v = (values[t[0]] + values[t[1]] + values[t[2]]) / 3.0;
            let pts: Vec<String> = t
                .iter()
                .map(|&k| {
                    let (x, y) = self.map(mesh.vertices()[k]);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let c = color(v, scale);
            let _ = writeln!(self.body, r#"<polygon points="{}" fill="{c}" stroke="{c}" stroke-width="0.3"/>"#, pts.join(" "));
        }
    }

    /// Square cells centred on scan points.
    pub fn cells(&mut self, points: &[[f64; 2]], values: &[f64], outline: &[bool], half: f64) {
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let w = half / self.bounds.width() * SIZE * 2.0;
        for (k, &p) in points.iter().enumerate() {
            let (x, y) = self.map([p[0] - half, p[1] + half]);
            let stroke = if outline[k] { r##" stroke="#d00000" stroke-width="2""## } else { "" };
            let _ = writeln!(
                self.body,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{w:.2}" fill="{}"{stroke}/>"#,
                color(values[k], scale)
            );
        }
    }

    pub fn polyline(&mut self, pts: &[[f64; 2]], stroke: &str) {
        let s: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#, s.join(" "));
    }

    pub fn marker(&mut self, p: [f64; 2], fill: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="{fill}" stroke="black"/>"#);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n{}</svg>\n",
            self.body
        )
    }
}

/// Blue for negative, white at zero, red for positive.
fn color(v: f64, scale: f64) -> String {
    let a = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = (255.0 * (1.0 - a.abs())).round() as u8;
    if a < 0.0 {
        format!("#{fade:02x}{fade:02x}ff")
    } else {
        format!("#ff{fade:02x}{fade:02x}")
    }
}

/// Closed outline of a primitive, for overlays.
pub fn outline(p: &ccbm::mesh::Primitive) -> Vec<[f64; 2]> {
    match *p {
        ccbm::mesh::Primitive::Disc { center, radius } => (0..=64)
            .map(|k| {
                let a = k as f64 / 64.0 * std::f64::consts::TAU;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect(),
        ccbm::mesh::Primitive::Square { center, half_width: h } => {
            let [x, y] = center;
            vec![[x - h, y - h], [x + h, y - h], [x + h, y + h], [x - h, y + h], [x - h, y - h]]
        }
    }
}
