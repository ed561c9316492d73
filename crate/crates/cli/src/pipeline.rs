//! End-to-end run: every stage in order, each into its own subdirectory,
//! with a manifest recording the configuration hash and stage timings.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use chainshell::units::Shape;

use crate::config::PipelineConfig;
use crate::stages::{self, GroupInfo};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    /// Rows or files written.
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn save(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string(self).map_err(|e| CliError::stage("manifest", e))?;
        fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| CliError::stage("manifest", e))
    }
}

struct Run<'a> {
    out: &'a Path,
    manifest: RunManifest,
}

impl Run<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> anyhow::Result<(T, usize)>) -> Result<T, CliError> {
        let start = Instant::now();
        match f() {
            Ok((value, outputs)) => {
                self.manifest.stages.push(StageRecord {
                    name: name.to_string(),
                    seconds: start.elapsed().as_secs_f64(),
                    outputs,
                });
                self.manifest.save(self.out)?;
                Ok(value)
            }
            Err(error) => {
                self.manifest.failed_stage = Some(name.to_string());
                self.manifest.error = Some(format!("{error:#}"));
                self.manifest.save(self.out)?;
                Err(CliError::stage(name, error))
            }
        }
    }
}

pub fn group_dir(out: &Path, stage: &str, group: u32) -> PathBuf {
    out.join(stage).join(format!("g{group}"))
}

/// Run every stage into `out`. The configuration is validated before any
/// output is written.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::stage("setup", e))?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()).map_err(|e| CliError::stage("setup", e))?;
    let mut run = Run {
        out,
        manifest: RunManifest {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            status: RunStatus::Incomplete,
            failed_stage: None,
            error: None,
            stages: Vec::new(),
        },
    };

    run.stage("units", || {
        let rows = stages::units(cfg)?;
        stages::write_csv(&out.join("units").join("units.csv"), &rows)?;
        Ok(((), rows.len()))
    })?;

    run.stage("sweep2d", || {
        let mut rows = Vec::new();
        for shape in Shape::ALL {
            rows.extend(stages::sweep(cfg, shape)?.1);
        }
        stages::write_csv(&out.join("sweep2d").join("sweep.csv"), &rows)?;
        Ok(((), rows.len()))
    })?;

    for &g in &cfg.gen3d.groups {
        run.stage(&format!("gen3d/g{g}"), || {
            let info = GroupInfo::for_group(cfg, g)?;
            let rows = stages::gen3d(cfg, &info, &group_dir(out, "gen3d", g))?;
            Ok(((), rows.len()))
        })?;
    }

    for &g in &cfg.gen3d.groups {
        run.stage(&format!("filter/g{g}"), || {
            let rows = stages::filter(cfg, &group_dir(out, "gen3d", g), &group_dir(out, "filter", g))?;
            Ok(((), rows.iter().filter(|r| r.kept).count()))
        })?;
    }

    run.stage("loads", || {
        let row = stages::loads(cfg, None)?;
        stages::write_csv(&out.join("loads").join("loads.csv"), &[row])?;
        Ok(((), 1))
    })?;

    run.stage("analyze", || {
        let settings = cfg.analysis_settings()?;
        let inputs: Vec<(PathBuf, PathBuf)> = cfg
            .gen3d
            .groups
            .iter()
            .map(|&g| {
                (
                    group_dir(out, "filter", g).join(stages::SELECTED_FILE),
                    group_dir(out, "gen3d", g),
                )
            })
            .collect();
        let rows = stages::analyze(&settings, &inputs)?;
        stages::write_csv(&out.join("analyze").join("displacements.csv"), &rows)?;
        Ok(((), rows.len()))
    })?;

    run.stage("optimize", || {
        let report = stages::optimize(cfg, &out.join("optimize"))?;
        Ok(((), report.candidates.len()))
    })?;

    run.manifest.status = RunStatus::Complete;
    run.manifest.save(out)?;
    Ok(run.manifest)
}
