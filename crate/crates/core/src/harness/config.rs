use alloc::format;

use serde::{Deserialize, Serialize};

use crate::assignment::BoxCostConfig;
use crate::decoders::{DecoderConfig, ManoeuvreModel, View};
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::scenario::FRAME_PERIOD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Query,
    Traditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Regression,
    Goal,
    Heatmap,
    Oracle,
}

/// Every knob of a run. Field names double as CLI flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: PipelineKind,
    pub decoder: DecoderKind,
    pub view: View,
    pub k: usize,
    pub t_future: usize,
    pub tau_epa: f64,
    pub alpha: f64,
    pub miss_threshold: f64,
    pub nms_radius: f64,
    pub tau_goal: f64,
    pub n_goal: usize,
    pub r_min: f64,
    pub heatmap_side: f64,
    pub smooth_l1_delta: f64,
    pub decoder_hidden: usize,
    pub s_bank: usize,
    pub n_query: usize,
    pub d_h: usize,
    pub d_k: usize,
    pub seed: u64,
    pub feature_sigma: f64,
    pub detection_noise: f64,
    pub dropout_rate: f64,
    /// Metres around a reference point within which features are sampled.
    pub sampling_radius: f64,
    pub residual_threshold: f64,
    pub box_include_yaw: bool,
    pub box_include_velocity: bool,
    pub turn_rate: f64,
    pub turn_frames: usize,
    pub intent_lead_frames: usize,
    pub kf_process_noise: f64,
    pub kf_measurement_noise: f64,
    pub kf_gate: f64,
    /// Extra gate for tracks seen once, whose velocity is still unknown:
    /// the gate grows by this speed times the frame period.
    pub kf_birth_speed: f64,
    pub kf_max_misses: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let d = DecoderConfig::default();
        let m = ManoeuvreModel::default();
        let mc = MetricConfig::default();
        Self {
            pipeline: PipelineKind::Query,
            decoder: DecoderKind::Oracle,
            view: View::Allocentric,
            k: d.k,
            t_future: d.t_future,
            tau_epa: mc.tau_epa,
            alpha: mc.alpha,
            miss_threshold: mc.miss_threshold,
            nms_radius: d.nms_radius,
            tau_goal: d.tau_goal,
            n_goal: d.n_goal,
            r_min: d.r_min,
            heatmap_side: d.heatmap_side,
            smooth_l1_delta: d.delta,
            decoder_hidden: d.hidden,
            s_bank: 4,
            n_query: 32,
            d_h: 256,
            d_k: 32,
            seed: 0,
            feature_sigma: 0.0,
            detection_noise: 0.0,
            dropout_rate: 0.0,
            sampling_radius: 2.5,
            residual_threshold: 0.1,
            box_include_yaw: false,
            box_include_velocity: false,
            turn_rate: m.turn_rate,
            turn_frames: m.turn_frames,
            intent_lead_frames: m.lead_frames,
            kf_process_noise: 0.5,
            kf_measurement_noise: 0.2,
            kf_gate: 2.0,
            kf_birth_speed: 15.0,
            kf_max_misses: 2,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be >= 0 and finite, got {v}")))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.t_future == 0 {
            return Err(Error::config("k and t_future must be >= 1"));
        }
        for (name, v) in [
            ("tau_epa", self.tau_epa),
            ("miss_threshold", self.miss_threshold),
            ("nms_radius", self.nms_radius),
            ("tau_goal", self.tau_goal),
            ("heatmap_side", self.heatmap_side),
            ("smooth_l1_delta", self.smooth_l1_delta),
            ("sampling_radius", self.sampling_radius),
            ("residual_threshold", self.residual_threshold),
            ("turn_rate", self.turn_rate),
            ("kf_measurement_noise", self.kf_measurement_noise),
            ("kf_gate", self.kf_gate),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("r_min", self.r_min),
            ("feature_sigma", self.feature_sigma),
            ("detection_noise", self.detection_noise),
            ("kf_process_noise", self.kf_process_noise),
            ("kf_birth_speed", self.kf_birth_speed),
        ] {
            non_negative(name, v)?;
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must lie in [0, 1)"));
        }
        if self.pipeline == PipelineKind::Query {
            if self.n_query == 0 || self.decoder_hidden == 0 || self.turn_frames == 0 || self.intent_lead_frames == 0 {
                return Err(Error::config("n_query, decoder_hidden, turn_frames and intent_lead_frames must be >= 1"));
            }
            if self.d_h < 11 {
                return Err(Error::config(format!("d_h must be >= 11 for the query pipeline, got {}", self.d_h)));
            }
            if self.d_k < 11 {
                return Err(Error::config(format!(
                    "d_k must be >= 11 so the query head can invert the readout, got {}",
                    self.d_k
                )));
            }
            if matches!(self.decoder, DecoderKind::Goal) && self.n_goal < self.k {
                return Err(Error::config("n_goal must be at least k"));
            }
            if matches!(self.decoder, DecoderKind::Heatmap) && libm::floor(self.heatmap_side) != self.heatmap_side {
                return Err(Error::config("heatmap_side must be a whole number of metres"));
            }
        }
        if self.kf_max_misses == 0 {
            return Err(Error::config("kf_max_misses must be >= 1"));
        }
        Ok(())
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        DecoderConfig {
            k: self.k,
            t_future: self.t_future,
            dt: FRAME_PERIOD,
            delta: self.smooth_l1_delta,
            tau_goal: self.tau_goal,
            nms_radius: self.nms_radius,
            n_goal: self.n_goal,
            r_min: self.r_min,
            heatmap_side: self.heatmap_side,
            hidden: self.decoder_hidden,
        }
    }

    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            k: self.k,
            t_future: self.t_future,
            tau_epa: self.tau_epa,
            alpha: self.alpha,
            miss_threshold: self.miss_threshold,
        }
    }

    pub fn manoeuvre_model(&self) -> ManoeuvreModel {
        ManoeuvreModel {
            turn_rate: self.turn_rate,
            turn_frames: self.turn_frames,
            lead_frames: self.intent_lead_frames,
        }
    }

    pub fn box_cost(&self) -> BoxCostConfig {
        BoxCostConfig {
            include_yaw: self.box_include_yaw,
            include_velocity: self.box_include_velocity,
        }
    }

    /// Short human-readable label used in comparison tables.
    pub fn label(&self) -> alloc::string::String {
        let p = match self.pipeline {
            PipelineKind::Query => "query",
            PipelineKind::Traditional => return alloc::string::String::from("traditional"),
        };
        let d = match self.decoder {
            DecoderKind::Regression => "regression",
            DecoderKind::Goal => "goal",
            DecoderKind::Heatmap => "heatmap",
            DecoderKind::Oracle => "oracle",
        };
        format!("{p}-{d}")
    }
}
