//! Planted-pattern corpus for end-to-end runs.
//!
//! Vulnerable functions copy into a buffer inside a guarded loop. Most of
//! them name a risky sink (`memcpy`, `strcpy`, ...). A configurable share
//! carries the same loop only in the shape the rewrite rules produce
//! (`while (1)` with a negated break guard, or a guarded `do`-`while`) and
//! calls an innocuous-looking helper instead. Normal functions are built
//! from the same filler statements with few rewrite sites. The `project`
//! field records which of the three groups a sample came from, before any
//! label noise is applied.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, FunctionSample};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub samples: usize,
    pub vulnerable_fraction: f64,
    /// Share of vulnerable samples whose pattern only appears in rewritten
    /// form.
    pub hidden_fraction: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            samples: 2000,
            vulnerable_fraction: 0.45,
            hidden_fraction: 0.3,
            label_noise: 0.02,
            seed: 0,
        }
    }
}

pub const GROUP_NORMAL: &str = "normal";
pub const GROUP_PLAIN: &str = "plain";
pub const GROUP_HIDDEN: &str = "hidden";

const VARS: &[&str] = &[
    "len", "idx", "count", "size", "off", "pos", "total", "flags", "mode", "state", "width",
    "height", "depth", "limit", "step",
];
const FUNCS: &[&str] = &[
    "process", "handle", "parse", "update", "compute", "check", "decode", "encode", "probe",
    "scan", "fill", "reset",
];
const CALLS: &[&str] = &[
    "get_value",
    "read_byte",
    "next_token",
    "lookup",
    "emit",
    "store",
    "log_event",
    "notify",
    "copy_block",
    "put_bytes",
    "write_out",
    "move_data",
];
const SINKS: &[&str] = &["memcpy", "strcpy", "strcat", "sprintf"];
const HELPERS: &[&str] = &["copy_block", "put_bytes", "write_out", "move_data"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty pool")
    }

    fn lit(&mut self) -> i64 {
        self.rng.gen_range(1..64)
    }

    fn filler(&mut self, out: &mut Vec<String>, a: &str, b: &str) {
        let v = self.pick(VARS);
        let c = self.pick(CALLS);
        let stmt = match self.rng.gen_range(0..6) {
            0 => format!("{a} = {a} + {};", self.lit()),
            1 => format!("{b} = {c}({a});"),
            2 => format!(
                "if ({a} > {b}) {{\n        {a} = {a} - {b};\n    }} else {{\n        {b} = {b} + {};\n    }}",
                self.lit()
            ),
            3 => format!(
                "for (int i = 0; i < {}; i++) {{\n        if (i == {b}) {{\n            continue;\n        }}\n        {a} += i;\n    }}",
                self.lit()
            ),
            4 => format!("{c}({a}, {b});"),
            _ => format!("int {v}_{} = {a} * {};", self.lit(), self.lit()),
        };
        out.push(stmt);
    }

    fn function(&mut self, body: Vec<String>, a: &str, b: &str) -> String {
        let name = format!("{}_{}", self.pick(FUNCS), self.rng.gen_range(0..1000));
        let mut code =
            format!("static int {name}(int {a}, int {b}, char *buf, const char *src)\n{{\n");
        for s in body {
            code.push_str("    ");
            code.push_str(&s);
            code.push('\n');
        }
        code.push_str(&format!("    return {a};\n}}\n"));
        code
    }

    fn sample(&mut self, group: &str) -> String {
        let a = self.pick(VARS);
        let b = loop {
            let b = self.pick(VARS);
            if b != a {
                break b;
            }
        };
        let mut body = Vec::new();
        let fillers = self.rng.gen_range(2..6);
        let at = self.rng.gen_range(0..=fillers);
        for i in 0..=fillers {
            if i == at {
                match group {
                    GROUP_PLAIN => body.push(self.plain_pattern(a, b)),
                    GROUP_HIDDEN => body.push(self.hidden_pattern(a, b)),
                    _ => {
                        // an occasional else-less guard keeps normals from being site-free
                        if self.rng.gen_bool(0.2) {
                            body.push(format!("if ({a} < 0) {{\n        {a} = 0;\n    }}"));
                        }
                    }
                }
            }
            if i < fillers {
                self.filler(&mut body, a, b);
            }
        }
        self.function(body, a, b)
    }

    fn plain_pattern(&mut self, a: &str, b: &str) -> String {
        let sink = self.pick(SINKS);
        if self.rng.gen_bool(0.7) {
            format!(
                "while ({a} > 0) {{\n        {sink}(buf, src, {a});\n        {a} = {a} - {b};\n    }}"
            )
        } else {
            format!("if ({a} > {b}) {{\n        {sink}(buf, src, {a});\n    }}")
        }
    }

    fn hidden_pattern(&mut self, a: &str, b: &str) -> String {
        let helper = self.pick(HELPERS);
        if self.rng.gen_bool(0.6) {
            format!(
                "while (1) {{\n        if (!({a} > 0)) {{\n            break;\n        }}\n        {helper}(buf, src, {a});\n        {a} = {a} - {b};\n    }}"
            )
        } else {
            format!(
                "if ({a} > 0) {{\n        do {{\n            {helper}(buf, src, {a});\n            {a} = {a} - {b};\n        }} while ({a} > 0);\n    }}"
            )
        }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut samples = Vec::with_capacity(cfg.samples);
    for i in 0..cfg.samples {
        let vulnerable = g.rng.gen_bool(cfg.vulnerable_fraction);
        let group = match (vulnerable, g.rng.gen_bool(cfg.hidden_fraction)) {
            (false, _) => GROUP_NORMAL,
            (true, false) => GROUP_PLAIN,
            (true, true) => GROUP_HIDDEN,
        };
        let code = g.sample(group);
        let flip = g.rng.gen_bool(cfg.label_noise);
        let mut s = FunctionSample::new(format!("syn{i:05}"), code, u8::from(vulnerable != flip));
        s.project = Some(group.to_string());
        samples.push(s);
    }
    Dataset::new(format!("synthetic-{}", cfg.seed), samples)
}
