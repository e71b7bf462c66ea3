//! Experiment dispatch: builds the model from a [`RunConfig`], runs the
//! requested experiment and writes records to a [`RecordSink`].

use std::io::{BufReader, Write};
use std::time::Instant;

use crate::action::{Configuration, CouplingParams};
use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, MetropolisParams, single_edge_quadrature, AcceptanceStats, TraceObservable};
use crate::langevin::{contraction_experiment, ContractionSetup, LangevinChain};
use crate::lattice::{parse_moves, Lattice, LoopWord};
use crate::observables::{edge_entries, plaquette_traces, wilson_loop};
use crate::record::{
    decode_links, encode_links, read_records, version_string, Checkpoint, Constants, Details, NamedEstimate, NamedVerdict,
    RecordKind, RecordSink, ResultRecord, SCHEMA, SCHEMA_VERSION,
};
use crate::rng::{streams, StreamKey};
use crate::stats::{covariance_decay, estimate, mean, susceptibility_sums, variance_bound_check, Verdict};
use crate::verify::{run_checks, Faults};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// What a finished run reports back to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub records: usize,
    pub failed: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }
}

/// Exit code for the result of [`run_experiment`].
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(_) => EXIT_ERROR,
    }
}

/// Stable identifier derived from the parts of the configuration that
/// affect results, so a resumed run keeps the id of the original.
pub fn experiment_id(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output = None;
    c.threads = 1;
    c.record_wall_clock = false;
    c.checkpoint.resume_from = None;
    // FNV-1a over the canonical TOML text
    let hash = c
        .to_toml()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3));
    format!("{}-{hash:016x}", cfg.experiment.name())
}

/// Runs the experiment on a pool of `cfg.threads` workers. Human-readable
/// progress and warnings go to `log`.
pub fn run_experiment<W: Write + Send>(cfg: &RunConfig, sink: &mut RecordSink<W>, log: &mut (dyn Write + Send)) -> Result<RunOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    pool.install(|| Runner::new(cfg, sink, log).and_then(|mut r| r.dispatch()))
}

struct Runner<'a, W: Write> {
    cfg: &'a RunConfig,
    sink: &'a mut RecordSink<W>,
    log: &'a mut (dyn Write + Send),
    params: CouplingParams,
    lattice: Lattice,
    id: String,
    started: Instant,
    records: usize,
}

/// Named observables sampled along a chain, with their time series.
struct Series {
    loops: Vec<(String, Vec<LoopWord>)>,
    plaquette: bool,
    values: Vec<(String, Vec<f64>)>,
}

impl<'a, W: Write> Runner<'a, W> {
    fn new(cfg: &'a RunConfig, sink: &'a mut RecordSink<W>, log: &'a mut (dyn Write + Send)) -> Result<Self> {
        Ok(Self {
            params: cfg.coupling_params()?,
            lattice: Lattice::new(cfg.lattice_spec()?),
            id: experiment_id(cfg),
            cfg,
            sink,
            log,
            started: Instant::now(),
            records: 0,
        })
    }

    fn dispatch(&mut self) -> Result<RunOutcome> {
        let resumable = matches!(self.cfg.experiment, ExperimentKind::Langevin | ExperimentKind::Gibbs);
        if !resumable && self.cfg.checkpoint.resume_from.is_some() {
            return Err(Error::Config(format!(
                "only langevin and gibbs runs can resume, not {}",
                self.cfg.experiment.name()
            )));
        }
        let failed = match self.cfg.experiment {
            ExperimentKind::Verify => self.verify()?,
            ExperimentKind::Langevin => self.langevin()?,
            ExperimentKind::Gibbs => self.gibbs()?,
            ExperimentKind::Couple => self.couple()?,
            ExperimentKind::Measure => self.measure()?,
        };
        Ok(RunOutcome {
            records: self.records,
            failed,
        })
    }

    fn record(&self, kind: RecordKind) -> ResultRecord {
        ResultRecord {
            schema: SCHEMA.into(),
            schema_version: SCHEMA_VERSION,
            kind,
            experiment_id: self.id.clone(),
            version: version_string(),
            config: self.cfg.clone(),
            constants: Constants::new(&self.params, Some(self.cfg.coupling.weight_a)),
            observables: Vec::new(),
            verdicts: Vec::new(),
            details: None,
            checkpoint: None,
            wall_clock_seconds: None,
        }
    }

    fn emit(&mut self, mut r: ResultRecord) -> Result<()> {
        if self.cfg.record_wall_clock && r.kind != RecordKind::Checkpoint {
            r.wall_clock_seconds = Some(self.started.elapsed().as_secs_f64());
        }
        self.sink.emit(&r)?;
        self.records += 1;
        Ok(())
    }

    fn note(&mut self, msg: &str) {
        // logging is best effort
        let _ = writeln!(self.log, "{msg}");
    }

    fn verify(&mut self) -> Result<bool> {
        let outcomes = run_checks(&Faults::default());
        let mut r = self.record(RecordKind::Check);
        for o in &outcomes {
            self.note(&o.to_string());
            r.verdicts.push(NamedVerdict {
                name: o.name.into(),
                verdict: if o.passed { Verdict::Pass } else { Verdict::Fail },
                detail: o.detail.clone(),
            });
        }
        self.emit(r)?;
        Ok(outcomes.iter().any(|o| !o.passed))
    }

    fn series(&self) -> Result<Series> {
        let mut loops = Vec::new();
        for spec in &self.cfg.observables.loops {
            loops.push((format!("loop:{}", spec.name), loop_translates(&spec.moves, &self.lattice)?));
        }
        let mut values = Vec::new();
        if self.cfg.observables.plaquette {
            values.push(("plaquette".to_string(), Vec::new()));
        }
        values.extend(loops.iter().map(|(name, _)| (name.clone(), Vec::new())));
        Ok(Series {
            loops,
            plaquette: self.cfg.observables.plaquette,
            values,
        })
    }

    /// The last checkpoint in `resume_from`, checked against this run.
    fn resume_point(&self) -> Result<Option<Checkpoint>> {
        let Some(path) = &self.cfg.checkpoint.resume_from else {
            return Ok(None);
        };
        let file = std::fs::File::open(path)?;
        let last = read_records(BufReader::new(file))?
            .into_iter().rfind(|r| r.kind == RecordKind::Checkpoint)
            .ok_or_else(|| Error::Config(format!("{} holds no checkpoint record", path.display())))?;
        if last.experiment_id != self.id {
            return Err(Error::Config(format!(
                "checkpoint belongs to {}, this run is {}",
                last.experiment_id, self.id
            )));
        }
        Ok(last.checkpoint)
    }

    fn restore(&self, cp: &Checkpoint, series: &mut Series) -> Result<Configuration> {
        if cp.series.len() != series.values.len() || cp.series.iter().zip(&series.values).any(|(a, b)| a.0 != b.0) {
            return Err(Error::Config("checkpoint observables do not match the configuration".into()));
        }
        series.values = cp.series.clone();
        decode_links(&cp.links, self.params.group.n(), self.lattice.edge_count())
    }

    fn checkpoint(&mut self, step: u64, cfg: &Configuration, series: &Series, stats: AcceptanceStats) -> Result<()> {
        let mut r = self.record(RecordKind::Checkpoint);
        r.checkpoint = Some(Checkpoint {
            step,
            links: encode_links(cfg),
            series: series.values.clone(),
            accepted: stats.accepted,
            proposed: stats.proposed,
        });
        self.emit(r)
    }

    fn summarise(&self, series: &Series, r: &mut ResultRecord) -> Result<()> {
        for (name, values) in &series.values {
            r.observables.push(NamedEstimate {
                name: name.clone(),
                estimate: estimate(values)?,
            });
        }
        Ok(())
    }

    fn langevin(&mut self) -> Result<bool> {
        let integ = self.cfg.integrator(&self.params);
        if let Some(w) = integ.drift_warning(&self.params) {
            self.note(&format!("warning: {w}"));
        }
        let mut series = self.series()?;
        let mut chain = match self.resume_point()? {
            Some(cp) => LangevinChain {
                cfg: self.restore(&cp, &mut series)?,
                step: cp.step,
            },
            None => LangevinChain::new(self.start_configuration()),
        };
        let lv = &self.cfg.langevin;
        let (burn_in, thin, every) = (lv.burn_in, lv.thin, self.cfg.checkpoint.every);
        integ.validate()?;
        while chain.step < integ.n_steps {
            chain.advance(&self.params, &self.lattice, &integ)?;
            if chain.step > burn_in && (chain.step - burn_in) % thin == 0 {
                series.observe(&chain.cfg, &self.lattice, self.params.group.n());
            }
            if every > 0 && chain.step % every == 0 && chain.step < integ.n_steps {
                self.checkpoint(chain.step, &chain.cfg, &series, AcceptanceStats::default())?;
            }
        }
        let mut r = self.record(RecordKind::Result);
        self.summarise(&series, &mut r)?;
        self.emit(r)?;
        Ok(false)
    }

    fn start_configuration(&self) -> Configuration {
        if self.cfg.langevin.hot_start {
            Configuration::haar(&self.lattice, &self.params.group, StreamKey::new(self.cfg.seed, streams::INITIAL_CONFIG))
        } else {
            Configuration::identity(&self.lattice, &self.params.group)
        }
    }

    fn gibbs(&mut self) -> Result<bool> {
        let mp = self.cfg.metropolis_params();
        mp.validate()?;
        let mut series = self.series()?;
        let (mut cfg, mut sweep, mut stats) = match self.resume_point()? {
            Some(cp) => (
                self.restore(&cp, &mut series)?,
                cp.step,
                AcceptanceStats {
                    accepted: cp.accepted,
                    proposed: cp.proposed,
                },
            ),
            None => (Configuration::identity(&self.lattice, &self.params.group), 0, AcceptanceStats::default()),
        };
        let every = self.cfg.checkpoint.every;
        let n = self.params.group.n();
        while sweep < mp.sweeps {
            let end = if every > 0 { (sweep / every + 1) * every } else { mp.sweeps }.min(mp.sweeps);
            let segment = MetropolisParams { sweeps: end, ..mp };
            let lattice = &self.lattice;
            stats.merge(run_chain(&mut cfg, &self.params, lattice, &segment, sweep, |_, c| {
                series.observe(c, lattice, n)
            })?);
            sweep = end;
            if every > 0 && sweep < mp.sweeps {
                self.checkpoint(sweep, &cfg, &series, stats)?;
            }
        }
        if let Some(w) = stats.band_warning() {
            self.note(&format!("warning: {w}"));
        }
        let mut r = self.record(RecordKind::Result);
        self.summarise(&series, &mut r)?;
        r.details = Some(Details::Acceptance { rate: stats.rate() });
        self.emit(r)?;
        Ok(false)
    }

    fn couple(&mut self) -> Result<bool> {
        self.params.require_admissible("the coupling experiment")?;
        let integ = self.cfg.integrator(&self.params);
        let cp = &self.cfg.coupling;
        let setup = ContractionSetup {
            a: cp.weight_a,
            n_pairs: cp.n_pairs,
            record_every: cp.record_every,
            kind: cp.kind,
            bootstrap: cp.bootstrap,
        };
        let report = contraction_experiment(&self.params, &self.lattice, &integ, &setup)?;
        let passed = report.ci_high < 0.0;
        let mut r = self.record(RecordKind::Result);
        r.verdicts.push(NamedVerdict {
            name: "contraction".into(),
            verdict: if passed { Verdict::Pass } else { Verdict::Fail },
            detail: format!(
                "rate {:.4} with 95% CI [{:.4}, {:.4}]; 2 K~_S = {:.4}",
                report.rate, report.ci_low, report.ci_high, report.two_tilde_k
            ),
        });
        r.details = Some(Details::Contraction(report));
        self.emit(r)?;
        Ok(!passed)
    }

    /// Metropolis sampling followed by every bound check that the sample
    /// supports.
    fn measure(&mut self) -> Result<bool> {
        self.params.require_admissible("the measure experiment")?;
        let mp = self.cfg.metropolis_params();
        let n = self.params.group.n();
        let mut series = self.series()?;
        let mut traces = Vec::new();
        let mut edges = Vec::new();
        let mut loop_values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); series.loops.len()];
        let mut cfg = Configuration::identity(&self.lattice, &self.params.group);
        let lattice = &self.lattice;
        let stats = run_chain(&mut cfg, &self.params, lattice, &mp, 0, |_, c| {
            series.observe(c, lattice, n);
            traces.push(plaquette_traces(c, lattice, n));
            edges.push(edge_entries(c));
            for (out, (_, words)) in loop_values.iter_mut().zip(&series.loops) {
                out.push(words.iter().map(|w| wilson_loop(c, w).re / n as f64).collect());
            }
        })?;

        let mut bounds = vec![variance_bound_check(&traces, 4, &self.params)?];
        for ((name, words), values) in series.loops.iter().zip(&loop_values) {
            let len = words[0].len();
            if len >= 4 {
                let mut b = variance_bound_check(values, len, &self.params)?;
                b.name = format!("{name} variance");
                bounds.push(b);
            }
        }
        let unnormalised: Vec<Vec<f64>> = traces.iter().map(|t| t.iter().map(|x| x * n as f64).collect()).collect();
        let (edge, plaq) = susceptibility_sums(&edges, &unnormalised, &self.params)?;
        bounds.push(edge);
        bounds.push(plaq);
        let decay = covariance_decay(&unnormalised, lattice, &self.cfg.observables.separations)?;

        let mut r = self.record(RecordKind::Result);
        self.summarise(&series, &mut r)?;
        for b in &bounds {
            r.verdicts.push(NamedVerdict {
                name: b.name.clone(),
                verdict: b.verdict,
                detail: format!("upper 95% limit {:.4e} vs bound {:.4e}", b.upper, b.bound),
            });
        }
        r.verdicts.push(NamedVerdict {
            name: "covariance_decay".into(),
            verdict: decay.verdict,
            detail: match (decay.rate, decay.rate_stderr) {
                (Some(rate), Some(se)) => format!("rate {rate:.4} +- {se:.4}"),
                _ => format!("{} resolvable separations", decay.fitted.len()),
            },
        });
        if self.params.beta == 0.0 {
            let haar = single_edge_quadrature(&self.params.group, 0.0, TraceObservable::ReTr)? / n as f64;
            let m = estimate(&traces.iter().map(|t| mean(t)).collect::<Vec<_>>())?;
            let ok = (m.mean - haar).abs() <= 3.0 * m.stderr.max(1e-12);
            r.verdicts.push(NamedVerdict {
                name: "haar_reference".into(),
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                detail: format!("plaquette mean {:.4e} +- {:.1e} vs Haar value {haar:.4e}", m.mean, m.stderr),
            });
        }
        if let Some(w) = stats.band_warning() {
            self.note(&format!("warning: {w}"));
        }
        let failed = r.verdicts.iter().any(|v| v.verdict == Verdict::Fail);
        r.details = Some(Details::Measure {
            bounds,
            decay,
            acceptance_rate: stats.rate(),
        });
        self.emit(r)?;
        Ok(failed)
    }
}

impl Series {
    fn observe(&mut self, cfg: &Configuration, lattice: &Lattice, n: usize) {
        let mut slot = self.values.iter_mut();
        if self.plaquette {
            let t = plaquette_traces(cfg, lattice, n);
            slot.next().expect("plaquette slot").1.push(mean(&t));
        }
        for ((_, words), (_, out)) in self.loops.iter().zip(slot) {
            let s: f64 = words.iter().map(|w| wilson_loop(cfg, w).re).sum();
            out.push(s / (words.len() * n) as f64);
        }
    }
}

/// The loop traced by `moves` from every vertex of the lattice.
pub fn loop_translates(moves: &str, lattice: &Lattice) -> Result<Vec<LoopWord>> {
    let moves = parse_moves(moves)?;
    (0..lattice.vertex_count())
        .map(|v| lattice.reduce_loop(&lattice.path_from_moves(v, &moves)?))
        .collect()
}
