//! Line-oriented scenario configuration: nested sections opened by a
//! keyword and closed by `end`, scalar `key value...` lines inside. See
//! docs/scenario_format.md for the grammar.

use std::fmt;

use stairclear::executor::PredictionMode;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One parse or validation finding, tied to a config line.
#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: line {}: {}", tag, self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StaircaseConfig {
    pub num_steps: u32,
    pub tread_depth: f64,
    pub riser_height: f64,
    pub width: f64,
    pub origin: [f64; 3],
    pub yaw: f64,
    pub left_wall: bool,
    pub right_wall: bool,
}

impl Default for StaircaseConfig {
    fn default() -> Self {
        Self {
            num_steps: 5,
            tread_depth: 0.30,
            riser_height: 0.16,
            width: 1.20,
            origin: [0.0; 3],
            yaw: 0.0,
            left_wall: false,
            right_wall: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundConfig {
    pub height: f64,
    /// min_x min_y max_x max_y
    pub extent: [f64; 4],
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self {
            height: 0.0,
            extent: [-2.0, -1.5, 3.5, 2.5],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SensorConfig {
    pub fov_deg: f64,
    pub range: f64,
    pub noise_sigma: f64,
    pub density: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov_deg: 120.0,
            range: 4.0,
            noise_sigma: 0.005,
            density: 2500.0,
        }
    }
}

/// Placement of one object on the scenario staircase.
#[derive(Clone, Debug)]
pub struct ObjectConfig {
    pub name: String,
    /// Step index (1-based) or 0 for the ground.
    pub step: u32,
    /// Lateral position across the step, stair frame.
    pub lateral: f64,
    /// Along-ascent offset: from the tread center for step objects, the
    /// absolute stair-frame x for ground objects.
    pub ascent_offset: f64,
    /// Full extents (ascent, lateral, vertical).
    pub dims: [f64; 3],
    pub mass: f64,
    pub movable: bool,
    pub contact_force: f64,
    pub slip_prob: f64,
    pub slip_frac: (f64, f64),
    pub density: f64,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        Self {
            name: String::new(),
            step: 1,
            lateral: 0.6,
            ascent_offset: 0.0,
            dims: [0.3, 0.25, 0.22],
            mass: 2.0,
            movable: true,
            contact_force: 12.0,
            slip_prob: 0.0,
            slip_frac: (0.3, 1.0),
            density: 4000.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExecutorSection {
    pub partial_push_thresh: f64,
    pub stall_window: f64,
    pub stall_motion_eps: f64,
    pub max_retries: u32,
    pub foot_speed: f64,
    pub standoff: f64,
}

impl Default for ExecutorSection {
    fn default() -> Self {
        Self {
            partial_push_thresh: 0.10,
            stall_window: 5.0,
            stall_motion_eps: 0.01,
            max_retries: 3,
            foot_speed: 0.10,
            standoff: 0.60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DetectorConfig {
    pub threshold: f64,
    pub sustain: f64,
    pub torque_noise_sigma: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 4.0,
            sustain: 0.1,
            torque_noise_sigma: 0.3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimSection {
    pub dt: f64,
    pub capability_mass: f64,
    pub force_scale: f64,
    pub drift_sigma: f64,
    pub registration_sigma: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            capability_mass: 8.0,
            force_scale: 1.0,
            drift_sigma: 0.01,
            registration_sigma: 0.002,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanEntry {
    pub object: String,
    pub direction: String,
}

/// A fully parsed scenario.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub trials: u32,
    pub mode: PredictionMode,
    /// Full-extent limits for the movability size gate.
    pub size_limits: [f64; 3],
    pub staircases: Vec<StaircaseConfig>,
    pub ground: GroundConfig,
    pub sensor: SensorConfig,
    pub objects: Vec<ObjectConfig>,
    pub executor: ExecutorSection,
    pub detector: DetectorConfig,
    pub sim: SimSection,
    pub plan: Vec<PlanEntry>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            seed: 0,
            trials: 1,
            mode: PredictionMode::Feedback,
            size_limits: [0.60, 0.60, 0.50],
            staircases: vec![],
            ground: GroundConfig::default(),
            sensor: SensorConfig::default(),
            objects: vec![],
            executor: ExecutorSection::default(),
            detector: DetectorConfig::default(),
            sim: SimSection::default(),
            plan: vec![],
        }
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            cur.push((prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn suggest(key: &str, known: &[&str]) -> Option<String> {
    known
        .iter()
        .map(|k| (levenshtein(key, k), *k))
        .min_by_key(|(d, _)| *d)
        .filter(|(d, _)| *d <= 3)
        .map(|(_, k)| k.to_string())
}

struct Parser<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let stripped = match raw.find('#') {
                    Some(h) => &raw[..h],
                    None => raw,
                };
                let tokens: Vec<&str> = stripped.split_whitespace().collect();
                if tokens.is_empty() {
                    None
                } else {
                    Some((i + 1, tokens))
                }
            })
            .collect();
        Self {
            lines,
            pos: 0,
            diagnostics: Vec::new(),
        }
    }

    fn error(&mut self, line: usize, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            line,
            message: message.into(),
        });
    }

    fn warning(&mut self, line: usize, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            line,
            message: message.into(),
        });
    }

    fn parse_f64(&mut self, line: usize, token: &str, field: &str) -> f64 {
        match token.parse() {
            Ok(v) => v,
            Err(_) => {
                self.error(line, format!("{field}: expected a number, got `{token}`"));
                0.0
            }
        }
    }

    fn parse_u32(&mut self, line: usize, token: &str, field: &str) -> u32 {
        match token.parse() {
            Ok(v) => v,
            Err(_) => {
                self.error(line, format!("{field}: expected an integer, got `{token}`"));
                0
            }
        }
    }

    fn parse_bool(&mut self, line: usize, token: &str, field: &str) -> bool {
        match token {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" => false,
            _ => {
                self.error(line, format!("{field}: expected true/false, got `{token}`"));
                false
            }
        }
    }

    fn need(&mut self, line: usize, tokens: &[&str], n: usize, what: &str) -> bool {
        if tokens.len() < n + 1 {
            self.error(line, format!("{what}: expected {n} value(s)"));
            false
        } else {
            true
        }
    }

    /// Consume `key value` lines until `end`, dispatching via `apply`.
    fn section(&mut self, mut apply: impl FnMut(&mut Self, usize, &[&'a str]) -> bool, known: &[&str]) {
        while self.pos < self.lines.len() {
            let (line, tokens) = self.lines[self.pos].clone();
            self.pos += 1;
            if tokens[0] == "end" {
                return;
            }
            if !apply(self, line, &tokens) {
                let msg = match suggest(tokens[0], known) {
                    Some(s) => format!("unknown key `{}` (did you mean `{s}`?)", tokens[0]),
                    None => format!("unknown key `{}`", tokens[0]),
                };
                self.warning(line, msg);
            }
        }
        let last = self.lines.last().map(|(l, _)| *l).unwrap_or(0);
        self.error(last, "section not closed with `end`");
    }
}

const TOP_KEYS: &[&str] = &[
    "scenario", "seed", "trials", "mode", "size_limits", "staircase", "ground", "sensor",
    "object", "executor", "detector", "sim", "plan",
];
const STAIR_KEYS: &[&str] = &[
    "num_steps", "tread_depth", "riser_height", "width", "origin", "yaw", "left_wall",
    "right_wall",
];
const GROUND_KEYS: &[&str] = &["height", "extent"];
const SENSOR_KEYS: &[&str] = &["fov_deg", "range", "noise_sigma", "density"];
const OBJECT_KEYS: &[&str] = &[
    "step", "ground", "lateral", "ascent_offset", "dims", "mass", "movable", "contact_force",
    "slip_prob", "slip_frac", "density",
];
const EXEC_KEYS: &[&str] = &[
    "partial_push_thresh", "stall_window", "stall_motion_eps", "max_retries", "foot_speed",
    "standoff",
];
const DETECTOR_KEYS: &[&str] = &["threshold", "sustain", "torque_noise_sigma"];
const SIM_KEYS: &[&str] = &[
    "dt", "capability_mass", "force_scale", "drift_sigma", "registration_sigma",
];

/// Parse a scenario from text. Errors abort; warnings ride along in the
/// returned diagnostics.
pub fn parse(text: &str) -> Result<(ScenarioConfig, Vec<Diagnostic>), ConfigError> {
    let mut p = Parser::new(text);
    let mut cfg = ScenarioConfig::default();

    while p.pos < p.lines.len() {
        let (line, tokens) = p.lines[p.pos].clone();
        p.pos += 1;
        match tokens[0] {
            "scenario" => {
                if p.need(line, &tokens, 1, "scenario") {
                    cfg.name = tokens[1].to_string();
                }
            }
            "seed" => {
                if p.need(line, &tokens, 1, "seed") {
                    cfg.seed = tokens[1].parse().unwrap_or_else(|_| {
                        p.error(line, format!("seed: expected an integer, got `{}`", tokens[1]));
                        0
                    });
                }
            }
            "trials" => {
                if p.need(line, &tokens, 1, "trials") {
                    cfg.trials = p.parse_u32(line, tokens[1], "trials");
                }
            }
            "size_limits" => {
                if p.need(line, &tokens, 3, "size_limits") {
                    for k in 0..3 {
                        cfg.size_limits[k] = p.parse_f64(line, tokens[k + 1], "size_limits");
                    }
                }
            }
            "mode" => {
                if p.need(line, &tokens, 1, "mode") {
                    cfg.mode = match tokens[1] {
                        "feedback" => PredictionMode::Feedback,
                        "baseline" | "open_loop" => PredictionMode::OpenLoopBaseline,
                        other => {
                            p.error(line, format!("mode: expected feedback|baseline, got `{other}`"));
                            PredictionMode::Feedback
                        }
                    };
                }
            }
            "staircase" => {
                let mut s = StaircaseConfig::default();
                p.section(
                    |p, line, t| match t[0] {
                        "num_steps" if p.need(line, t, 1, "num_steps") => {
                            s.num_steps = p.parse_u32(line, t[1], "num_steps");
                            true
                        }
                        "tread_depth" if p.need(line, t, 1, "tread_depth") => {
                            s.tread_depth = p.parse_f64(line, t[1], "tread_depth");
                            true
                        }
                        "riser_height" if p.need(line, t, 1, "riser_height") => {
                            s.riser_height = p.parse_f64(line, t[1], "riser_height");
                            true
                        }
                        "width" if p.need(line, t, 1, "width") => {
                            s.width = p.parse_f64(line, t[1], "width");
                            true
                        }
                        "origin" if p.need(line, t, 3, "origin") => {
                            for k in 0..3 {
                                s.origin[k] = p.parse_f64(line, t[k + 1], "origin");
                            }
                            true
                        }
                        "yaw" if p.need(line, t, 1, "yaw") => {
                            s.yaw = p.parse_f64(line, t[1], "yaw");
                            true
                        }
                        "left_wall" if p.need(line, t, 1, "left_wall") => {
                            s.left_wall = p.parse_bool(line, t[1], "left_wall");
                            true
                        }
                        "right_wall" if p.need(line, t, 1, "right_wall") => {
                            s.right_wall = p.parse_bool(line, t[1], "right_wall");
                            true
                        }
                        _ => false,
                    },
                    STAIR_KEYS,
                );
                cfg.staircases.push(s);
            }
            "ground" => {
                let mut g = GroundConfig::default();
                p.section(
                    |p, line, t| match t[0] {
                        "height" if p.need(line, t, 1, "height") => {
                            g.height = p.parse_f64(line, t[1], "height");
                            true
                        }
                        "extent" if p.need(line, t, 4, "extent") => {
                            for k in 0..4 {
                                g.extent[k] = p.parse_f64(line, t[k + 1], "extent");
                            }
                            true
                        }
                        _ => false,
                    },
                    GROUND_KEYS,
                );
                cfg.ground = g;
            }
            "sensor" => {
                let mut s = SensorConfig::default();
                p.section(
                    |p, line, t| match t[0] {
                        "fov_deg" if p.need(line, t, 1, "fov_deg") => {
                            s.fov_deg = p.parse_f64(line, t[1], "fov_deg");
                            true
                        }
                        "range" if p.need(line, t, 1, "range") => {
                            s.range = p.parse_f64(line, t[1], "range");
                            true
                        }
                        "noise_sigma" if p.need(line, t, 1, "noise_sigma") => {
                            s.noise_sigma = p.parse_f64(line, t[1], "noise_sigma");
                            true
                        }
                        "density" if p.need(line, t, 1, "density") => {
                            s.density = p.parse_f64(line, t[1], "density");
                            true
                        }
                        _ => false,
                    },
                    SENSOR_KEYS,
                );
                cfg.sensor = s;
            }
            "object" => {
                let mut o = ObjectConfig::default();
                if p.need(line, &tokens, 1, "object") {
                    o.name = tokens[1].to_string();
                }
                p.section(
                    |p, line, t| match t[0] {
                        "step" if p.need(line, t, 1, "step") => {
                            o.step = p.parse_u32(line, t[1], "step");
                            true
                        }
                        "ground" => {
                            o.step = 0;
                            true
                        }
                        "lateral" if p.need(line, t, 1, "lateral") => {
                            o.lateral = p.parse_f64(line, t[1], "lateral");
                            true
                        }
                        "ascent_offset" if p.need(line, t, 1, "ascent_offset") => {
                            o.ascent_offset = p.parse_f64(line, t[1], "ascent_offset");
                            true
                        }
                        "dims" if p.need(line, t, 3, "dims") => {
                            for k in 0..3 {
                                o.dims[k] = p.parse_f64(line, t[k + 1], "dims");
                            }
                            true
                        }
                        "mass" if p.need(line, t, 1, "mass") => {
                            o.mass = p.parse_f64(line, t[1], "mass");
                            true
                        }
                        "movable" if p.need(line, t, 1, "movable") => {
                            o.movable = p.parse_bool(line, t[1], "movable");
                            true
                        }
                        "contact_force" if p.need(line, t, 1, "contact_force") => {
                            o.contact_force = p.parse_f64(line, t[1], "contact_force");
                            true
                        }
                        "slip_prob" if p.need(line, t, 1, "slip_prob") => {
                            o.slip_prob = p.parse_f64(line, t[1], "slip_prob");
                            true
                        }
                        "slip_frac" if p.need(line, t, 2, "slip_frac") => {
                            o.slip_frac = (
                                p.parse_f64(line, t[1], "slip_frac"),
                                p.parse_f64(line, t[2], "slip_frac"),
                            );
                            true
                        }
                        "density" if p.need(line, t, 1, "density") => {
                            o.density = p.parse_f64(line, t[1], "density");
                            true
                        }
                        _ => false,
                    },
                    OBJECT_KEYS,
                );
                cfg.objects.push(o);
            }
            "executor" => {
                let mut e = ExecutorSection::default();
                p.section(
                    |p, line, t| match t[0] {
                        "partial_push_thresh" if p.need(line, t, 1, "partial_push_thresh") => {
                            e.partial_push_thresh = p.parse_f64(line, t[1], "partial_push_thresh");
                            true
                        }
                        "stall_window" if p.need(line, t, 1, "stall_window") => {
                            e.stall_window = p.parse_f64(line, t[1], "stall_window");
                            true
                        }
                        "stall_motion_eps" if p.need(line, t, 1, "stall_motion_eps") => {
                            e.stall_motion_eps = p.parse_f64(line, t[1], "stall_motion_eps");
                            true
                        }
                        "max_retries" if p.need(line, t, 1, "max_retries") => {
                            e.max_retries = p.parse_u32(line, t[1], "max_retries");
                            true
                        }
                        "foot_speed" if p.need(line, t, 1, "foot_speed") => {
                            e.foot_speed = p.parse_f64(line, t[1], "foot_speed");
                            true
                        }
                        "standoff" if p.need(line, t, 1, "standoff") => {
                            e.standoff = p.parse_f64(line, t[1], "standoff");
                            true
                        }
                        _ => false,
                    },
                    EXEC_KEYS,
                );
                cfg.executor = e;
            }
            "detector" => {
                let mut d = DetectorConfig::default();
                p.section(
                    |p, line, t| match t[0] {
                        "threshold" if p.need(line, t, 1, "threshold") => {
                            d.threshold = p.parse_f64(line, t[1], "threshold");
                            true
                        }
                        "sustain" if p.need(line, t, 1, "sustain") => {
                            d.sustain = p.parse_f64(line, t[1], "sustain");
                            true
                        }
                        "torque_noise_sigma" if p.need(line, t, 1, "torque_noise_sigma") => {
                            d.torque_noise_sigma = p.parse_f64(line, t[1], "torque_noise_sigma");
                            true
                        }
                        _ => false,
                    },
                    DETECTOR_KEYS,
                );
                cfg.detector = d;
            }
            "sim" => {
                let mut s = SimSection::default();
                p.section(
                    |p, line, t| match t[0] {
                        "dt" if p.need(line, t, 1, "dt") => {
                            s.dt = p.parse_f64(line, t[1], "dt");
                            true
                        }
                        "capability_mass" if p.need(line, t, 1, "capability_mass") => {
                            s.capability_mass = p.parse_f64(line, t[1], "capability_mass");
                            true
                        }
                        "force_scale" if p.need(line, t, 1, "force_scale") => {
                            s.force_scale = p.parse_f64(line, t[1], "force_scale");
                            true
                        }
                        "drift_sigma" if p.need(line, t, 1, "drift_sigma") => {
                            s.drift_sigma = p.parse_f64(line, t[1], "drift_sigma");
                            true
                        }
                        "registration_sigma" if p.need(line, t, 1, "registration_sigma") => {
                            s.registration_sigma = p.parse_f64(line, t[1], "registration_sigma");
                            true
                        }
                        _ => false,
                    },
                    SIM_KEYS,
                );
                cfg.sim = s;
            }
            "plan" => {
                p.section(
                    |p, line, t| match t[0] {
                        "push" if p.need(line, t, 2, "push") => {
                            cfg.plan.push(PlanEntry {
                                object: t[1].to_string(),
                                direction: t[2].to_string(),
                            });
                            true
                        }
                        _ => false,
                    },
                    &["push"],
                );
            }
            other => {
                let msg = match suggest(other, TOP_KEYS) {
                    Some(s) => format!("unknown key `{other}` (did you mean `{s}`?)"),
                    None => format!("unknown key `{other}`"),
                };
                p.warning(line, msg);
            }
        }
    }

    let mut diagnostics = std::mem::take(&mut p.diagnostics);
    validate(&cfg, &mut diagnostics);
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        return Err(ConfigError { diagnostics });
    }
    Ok((cfg, diagnostics))
}

/// Structural checks beyond syntax; appends to `diagnostics`.
pub fn validate(cfg: &ScenarioConfig, diagnostics: &mut Vec<Diagnostic>) {
    let mut err = |message: String| {
        diagnostics.push(Diagnostic {
            severity: Severity::Error,
            line: 0,
            message,
        })
    };
    if cfg.trials < 1 {
        err("trials must be >= 1".into());
    }
    if cfg.staircases.is_empty() {
        err("at least one staircase section is required".into());
    }
    if cfg.size_limits.iter().any(|&l| l <= 0.0) {
        err("size_limits must be > 0".into());
    }
    for (i, s) in cfg.staircases.iter().enumerate() {
        if s.num_steps < 1 {
            err(format!("staircase {i}: num_steps must be >= 1"));
        }
        for (field, v) in [
            ("tread_depth", s.tread_depth),
            ("riser_height", s.riser_height),
            ("width", s.width),
        ] {
            if v <= 0.0 {
                err(format!("staircase {i}: {field} must be > 0 (got {v})"));
            }
        }
    }
    if cfg.ground.extent[2] <= cfg.ground.extent[0] || cfg.ground.extent[3] <= cfg.ground.extent[1]
    {
        err("ground extent must have positive area".into());
    }
    if !(cfg.sensor.fov_deg > 0.0 && cfg.sensor.fov_deg < 180.0) {
        err(format!(
            "sensor fov_deg must lie in (0, 180), got {}",
            cfg.sensor.fov_deg
        ));
    }
    if cfg.sensor.noise_sigma < 0.0 {
        err("sensor noise_sigma must be >= 0".into());
    }
    for o in &cfg.objects {
        if o.dims.iter().any(|&d| d <= 0.0) {
            err(format!("object {}: dims must be > 0", o.name));
        }
        if o.mass <= 0.0 {
            err(format!("object {}: mass must be > 0", o.name));
        }
        if !(0.0..=1.0).contains(&o.slip_prob) {
            err(format!("object {}: slip_prob must lie in [0, 1]", o.name));
        }
        if let Some(s) = cfg.staircases.first() {
            if o.step > s.num_steps {
                err(format!(
                    "object {}: step {} exceeds staircase steps {}",
                    o.name, o.step, s.num_steps
                ));
            }
        }
    }
    for entry in &cfg.plan {
        if !cfg.objects.iter().any(|o| o.name == entry.object) {
            err(format!("plan references unknown object `{}`", entry.object));
        }
        if entry.direction != "left" && entry.direction != "right" {
            err(format!(
                "plan direction must be left|right, got `{}`",
                entry.direction
            ));
        }
    }
    if cfg.executor.max_retries > 20 {
        err("executor max_retries above 20 is not supported".into());
    }
    for (field, v) in [
        ("partial_push_thresh", cfg.executor.partial_push_thresh),
        ("stall_window", cfg.executor.stall_window),
        ("stall_motion_eps", cfg.executor.stall_motion_eps),
        ("foot_speed", cfg.executor.foot_speed),
        ("detector threshold", cfg.detector.threshold),
        ("detector sustain", cfg.detector.sustain),
        ("sim dt", cfg.sim.dt),
    ] {
        if v <= 0.0 {
            err(format!("{field} must be > 0 (got {v})"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
scenario demo
seed 7
trials 2
mode feedback

staircase
  num_steps 4
  tread_depth 0.3
  riser_height 0.16
  width 1.2
  origin 0 0 0
  yaw 0.0
end

object box
  step 2
  lateral 0.6
  dims 0.3 0.25 0.22
  mass 2.0
end

plan
  push box left
end
";

    #[test]
    fn minimal_config_parses() {
        let (cfg, diags) = parse(MINIMAL).expect("parse");
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(cfg.name, "demo");
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.staircases.len(), 1);
        assert_eq!(cfg.objects.len(), 1);
        assert_eq!(cfg.plan.len(), 1);
    }

    #[test]
    fn negative_tread_depth_is_an_error_naming_the_field() {
        let text = MINIMAL.replace("tread_depth 0.3", "tread_depth -0.3");
        let err = parse(&text).unwrap_err();
        assert!(err
            .diagnostics
            .iter()
            .any(|d| d.severity == Severity::Error && d.message.contains("tread_depth")));
    }

    #[test]
    fn unknown_key_warns_with_suggestion() {
        let text = MINIMAL.replace("tread_depth 0.3", "tread_dept 0.3");
        let (_, diags) = parse(&text).expect("warnings only");
        assert!(diags.iter().any(|d| d.severity == Severity::Warning
            && d.message.contains("tread_dept")
            && d.message.contains("tread_depth")));
    }

    #[test]
    fn size_limits_parse_and_validate() {
        let text = MINIMAL.replace("trials 2", "trials 2\nsize_limits 0.5 0.5 0.4");
        let (cfg, _) = parse(&text).expect("parse");
        assert_eq!(cfg.size_limits, [0.5, 0.5, 0.4]);
        let bad = MINIMAL.replace("trials 2", "trials 2\nsize_limits 0.5 -0.5 0.4");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn plan_referencing_unknown_object_errors() {
        let text = MINIMAL.replace("push box left", "push crate left");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn unclosed_section_errors() {
        let text = "staircase\n  num_steps 3\n";
        assert!(parse(text).is_err());
    }
}
