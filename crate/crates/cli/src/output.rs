//! Output sinks and renderers: CSV/JSON documents and PPM heatmaps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use phasecell::grid::ScalarField;
use phasecell::Result;
use serde_json::{json, Value};

/// Opens `path` for writing, or standard output when no path is given.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Units shared by every output.
#[derive(Debug, Clone, Copy)]
pub struct Units {
    pub hbar: f64,
    pub sigma: f64,
}

impl Units {
    pub fn sigma_x(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_p(&self) -> f64 {
        self.hbar / (2.0 * self.sigma)
    }

    pub fn to_json(self) -> Value {
        json!({ "hbar": self.hbar, "sigma": self.sigma, "sigma_x": self.sigma_x(), "sigma_p": self.sigma_p() })
    }

    /// Comment line preceding CSV output.
    pub fn csv_comment(&self) -> String {
        format!("# hbar={:e} sigma={:e} sigma_x={:e} sigma_p={:e}", self.hbar, self.sigma, self.sigma_x(), self.sigma_p())
    }
}

/// Field as CSV (`x,p,value`) preceded by the units comment.
pub fn write_field_csv(field: &ScalarField, units: Units, mut out: impl Write) -> Result<()> {
    writeln!(out, "{}", units.csv_comment())?;
    field.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Field as JSON: units, manifest, axes and values indexed `[x][p]`.
pub fn write_field_json(field: &ScalarField, manifest: Value, units: Units, mut out: impl Write) -> Result<()> {
    let values: Vec<Vec<f64>> = field.values().rows().into_iter().map(|r| r.to_vec()).collect();
    let doc = json!({
        "units": units.to_json(),
        "manifest": manifest,
        "xs": field.grid().xs(),
        "ps": field.grid().ps(),
        "values": values,
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Maps `v ∈ [−1, 1]` onto a diverging palette: blue for negative values,
/// white at zero, red for positive values, saturating linearly in `|v|`.
pub fn diverging(v: f64) -> [u8; 3] {
    let t = v.abs().min(1.0);
    let fade = (255.0 * (1.0 - t)).round() as u8;
    if v >= 0.0 {
        [255, fade, fade]
    } else {
        [fade, fade, 255]
    }
}

/// Binary PPM heatmap: one pixel per grid node, `x` increasing to the right
/// and `p` increasing upwards, scaled symmetrically by `max |value|` so that
/// zero is white.
pub fn write_field_ppm(field: &ScalarField, mut out: impl Write) -> Result<()> {
    let g = field.grid();
    let scale = field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    write!(out, "P6\n{} {}\n255\n", g.nx, g.np)?;
    let mut row = Vec::with_capacity(3 * g.nx);
    for j in (0..g.np).rev() {
        row.clear();
        for i in 0..g.nx {
            row.extend_from_slice(&diverging(field.at(i, j) / scale));
        }
        out.write_all(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json(value: &Value, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
