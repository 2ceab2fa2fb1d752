//! Deterministic synthetic regression cases.
//!
//! The passing log is a sequence of templated build-log lines: static words
//! plus dynamic fields (durations, hashes, counters, versions). The failing
//! log applies block moves, deletions, value updates and injected error
//! lines to it. Injected lines use a vocabulary disjoint from the templates
//! and are the case's annotations.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RegressionCase;
use crate::log::Log;

/// Per-line probabilities of each mutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub add: f64,
    pub delete: f64,
    pub update: f64,
    /// Per-line probability of starting a moved block.
    pub moves: f64,
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates {
            add: 0.02,
            delete: 0.02,
            update: 0.05,
            moves: 0.01,
        }
    }
}

impl MutationRates {
    pub const NONE: MutationRates = MutationRates {
        add: 0.0,
        delete: 0.0,
        update: 0.0,
        moves: 0.0,
    };
}

const MODULES: &[&str] = &[
    "core", "common", "api", "server", "client", "utils", "parser", "storage", "web", "cli",
];
const ARTIFACTS: &[&str] = &[
    "guava",
    "jackson-core",
    "logback-classic",
    "commons-io",
    "netty-handler",
    "slf4j-api",
    "junit-jupiter",
    "mockito-core",
    "scala-library",
    "datafixerupper",
];
const CLASSES: &[&str] = &[
    "ParserTest",
    "CacheTest",
    "RouterTest",
    "StoreTest",
    "ClientTest",
    "QueueTest",
    "IndexTest",
];
const METHODS: &[&str] = &[
    "testParse",
    "testEvict",
    "testRoute",
    "testFlush",
    "testRetry",
    "testMerge",
];
const COMMANDS: &[&str] = &[
    "checkout",
    "setup-java",
    "cache",
    "build",
    "test",
    "package",
    "upload",
];

const TEMPLATES: usize = 10;

struct Values<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl Values<'_> {
    fn pick<'s>(&mut self, from: &[&'s str]) -> &'s str {
        from[self.rng.gen_range(0..from.len())]
    }

    fn hash(&mut self, len: usize) -> String {
        (0..len)
            .map(|_| char::from_digit(self.rng.gen_range(0..16), 16).unwrap())
            .collect()
    }

    fn version(&mut self) -> String {
        format!(
            "{}.{}.{}",
            self.rng.gen_range(0..10),
            self.rng.gen_range(0..40),
            self.rng.gen_range(0..20)
        )
    }

    fn duration(&mut self) -> String {
        format!("{}.{:03}", self.rng.gen_range(0..60), self.rng.gen_range(0..1000))
    }

    fn count(&mut self) -> u32 {
        self.rng.gen_range(1..2000)
    }
}

/// A template keeps its static words fixed; re-rendering only changes values.
fn render(template: usize, module: &str, v: &mut Values) -> String {
    match template {
        0 => format!(
            "Downloading: {}-{}.jar ({} kB)",
            v.pick(ARTIFACTS),
            v.version(),
            v.count()
        ),
        1 => format!("Compiling module {module} ({} source files)", v.count()),
        2 => format!(
            "Running {}.{} took {} s",
            v.pick(CLASSES),
            v.pick(METHODS),
            v.duration()
        ),
        3 => format!("Step {}/{}: {}", v.count(), v.count(), v.pick(COMMANDS)),
        4 => format!("HEAD is now at {} merge #{}", v.hash(10), v.count()),
        5 => format!("Resolved {} dependencies in {} s", v.count(), v.duration()),
        6 => format!("[INFO] Building {module} {}", v.version()),
        7 => format!("Tests run: {}, Failures: 0, Skipped: {}", v.count(), v.count()),
        8 => format!("Cache key {}-{} restored", module, v.hash(16)),
        _ => format!("Memory usage: {}M/{}M", v.count(), v.count()),
    }
}

/// Injected error lines; odd variants carry none of the default keywords.
fn render_injected(v: &mut Values) -> String {
    let n = v.count();
    match v.rng.gen_range(0..6) {
        0 => format!("ERROR: NullPointerException at Worker.java:{n}"),
        1 => format!("FAILED assertion #{n} in suite {}", v.hash(6)),
        2 => format!("thread 'main' panicked at src/main.rs:{n}"),
        3 => format!("Expected {n} but found {}", v.count()),
        4 => format!("Killed signal 9 after {} s", v.duration()),
        _ => format!("make: *** [target{n}] Abort trap"),
    }
}

#[derive(Clone)]
struct GenLine {
    template: Option<usize>,
    module: &'static str,
    text: String,
    injected: bool,
}

fn passing_lines(rng: &mut ChaCha8Rng, size: usize) -> Vec<GenLine> {
    let mut lines = Vec::with_capacity(size);
    while lines.len() < size {
        // one stage: a module and a run of templated lines, then a blank line
        let module = MODULES[rng.gen_range(0..MODULES.len())];
        let run = rng.gen_range(3..20).min(size - lines.len());
        for _ in 0..run {
            let template = rng.gen_range(0..TEMPLATES);
            let text = render(template, module, &mut Values { rng: &mut *rng });
            lines.push(GenLine {
                template: Some(template),
                module,
                text,
                injected: false,
            });
        }
        if lines.len() < size && rng.gen_bool(0.3) {
            lines.push(GenLine {
                template: None,
                module,
                text: String::new(),
                injected: false,
            });
        }
    }
    lines
}

fn timestamp(day: u32, second: usize, frac: u32) -> String {
    let s = second % 86_400;
    format!(
        "2024-03-{day:02}T{:02}:{:02}:{:02}.{frac:07}Z ",
        s / 3600,
        s / 60 % 60,
        s % 60
    )
}

fn with_timestamps(rng: &mut ChaCha8Rng, day: u32, lines: &[GenLine]) -> Vec<String> {
    let mut second = rng.gen_range(0..40_000);
    lines
        .iter()
        .map(|l| {
            second += rng.gen_range(0..3);
            format!(
                "{}{}",
                timestamp(day, second, rng.gen_range(0..10_000_000)),
                l.text
            )
        })
        .collect()
}

/// Builds case `id` from `seed`; the same inputs always give the same case.
pub fn generate_synthetic_case(
    id: impl Into<String>,
    seed: u64,
    size: usize,
    rates: &MutationRates,
) -> RegressionCase {
    let id = id.into();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let passing = passing_lines(&mut rng, size);

    let mut failing = passing.clone();
    let starts: Vec<usize> = (0..failing.len()).filter(|_| rng.gen_bool(rates.moves)).collect();
    for start in starts {
        let len = rng.gen_range(1..=5);
        if start >= failing.len() {
            continue;
        }
        let block: Vec<GenLine> = failing.drain(start..(start + len).min(failing.len())).collect();
        let at = rng.gen_range(0..=failing.len());
        failing.splice(at..at, block);
    }

    let mut mutated = Vec::with_capacity(failing.len() + failing.len() / 10);
    for mut line in failing {
        if rng.gen_bool(rates.delete) {
            continue;
        }
        if let Some(t) = line.template {
            if rng.gen_bool(rates.update) {
                line.text = render(t, line.module, &mut Values { rng: &mut rng });
            }
        }
        mutated.push(line);
        if rng.gen_bool(rates.add) {
            // errors tend to arrive in short bursts
            let burst = *[1, 1, 1, 2, 3].choose(&mut rng).unwrap();
            for _ in 0..burst {
                mutated.push(GenLine {
                    template: None,
                    module: "",
                    text: render_injected(&mut Values { rng: &mut rng }),
                    injected: true,
                });
            }
        }
    }

    let annotations: BTreeSet<usize> = mutated
        .iter()
        .enumerate()
        .filter(|(_, l)| l.injected)
        .map(|(i, _)| i)
        .collect();
    let pass_text = with_timestamps(&mut rng, 4, &passing);
    let fail_text = with_timestamps(&mut rng, 5, &mutated);
    RegressionCase {
        passing: Log::from_lines(format!("{id}/pass.log"), pass_text),
        failing: Log::from_lines(format!("{id}/fail.log"), fail_text),
        annotations: Some(annotations),
        id,
    }
}

/// `count` cases named `case-0000`, `case-0001`, ...; each case's seed is
/// drawn from a generator seeded with `seed`.
pub fn synthetic_corpus(
    seed: u64,
    count: usize,
    size: usize,
    rates: MutationRates,
) -> impl Iterator<Item = RegressionCase> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(move |i| generate_synthetic_case(format!("case-{i:04}"), seeds.gen(), size, &rates))
}
