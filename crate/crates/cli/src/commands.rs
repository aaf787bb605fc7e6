use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cvwitness::descriptor::StateKind;
use cvwitness::oracle;
use cvwitness::sampling::{self, EstimatedCumulantSet, Layout, QuadratureSamples, SignedMixture};
use cvwitness::witness::{
    compute_cumulant_set, duan_witness, find_threshold, fourth_order_witness,
};
use cvwitness::{CumulantSet, EprOperatorPair, StateDescriptor, WitnessReport};
use rayon::prelude::*;

use crate::config::{ConfigFile, Grid};
use crate::{CliError, CriterionArg, StateArgs, SweepVar};

pub struct Resolved {
    /// Descriptor as the user wrote it.
    pub text: String,
    pub desc: StateDescriptor,
    pub pair: EprOperatorPair,
}

pub fn parse_pair(text: Option<&str>) -> Result<EprOperatorPair, CliError> {
    match text {
        None => Ok(EprOperatorPair::default()),
        Some(t) => t
            .parse()
            .map_err(|e: cvwitness::Error| CliError::Config(format!("--pair: {e}"))),
    }
}

pub fn resolve_state(cfg: &ConfigFile, args: &StateArgs) -> Result<Resolved, CliError> {
    let text = cfg
        .pick(args.state.clone(), "state")?
        .ok_or_else(|| CliError::Config("no state given (use --state)".into()))?;
    let mut desc: StateDescriptor = text
        .parse()
        .map_err(|e: cvwitness::Error| CliError::Config(format!("--state `{text}`: {e}")))?;
    // calibrate the ring radius once instead of at every grid point
    if desc.kind == StateKind::SplitFock
        && desc.eps.is_none()
        && desc.fid.is_some()
        && desc.n.is_some()
    {
        let eps = desc.ring_epsilon()?;
        desc = desc.with_param("eps", eps)?;
    }
    let pair = parse_pair(cfg.pick(args.pair.clone(), "pair")?.as_deref())?;
    Ok(Resolved { text, desc, pair })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Run(e.to_string())),
    }
}

type Reports = (WitnessReport, Option<WitnessReport>);

fn reports(desc: &StateDescriptor, pair: EprOperatorPair) -> Result<Reports, CliError> {
    let c = compute_cumulant_set(&desc.build()?, pair)?;
    Ok((fourth_order_witness(&c), duan_witness(&c, pair.g1).ok()))
}

fn report_line(r: &WitnessReport) -> String {
    format!(
        "{:<14}{:>18.10}{:>18.10}{:>18.10}  {}",
        r.criterion.to_string(),
        r.lhs,
        r.rhs,
        r.margin,
        r.verdict()
    )
}

pub fn witness(s: &Resolved, output: Option<PathBuf>) -> Result<(), CliError> {
    let (fourth, duan) = reports(&s.desc, s.pair)?;
    println!("state: {}", s.text);
    println!("pair:  {}", s.pair);
    println!(
        "{:<14}{:>18}{:>18}{:>18}  verdict",
        "criterion", "lhs", "rhs", "margin"
    );
    println!("{}", report_line(&fourth));
    match &duan {
        Some(d) => println!("{}", report_line(d)),
        None => println!(
            "{:<14}not applicable: pair is outside the Duan family",
            "duan"
        ),
    }
    if let Some(path) = output {
        let mut csv = String::from("state,criterion,lhs,rhs,margin,violated\n");
        for r in std::iter::once(&fourth).chain(duan.as_ref()) {
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                s.text, r.criterion, r.lhs, r.rhs, r.margin, r.violated
            )
            .unwrap();
        }
        write_text(Some(&path), &csv)?;
    }
    Ok(())
}

pub fn sweep(
    s: &Resolved,
    var: SweepVar,
    grid: &Grid,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    // reject an incompatible sweep variable up front rather than per point
    s.desc.with_param(var.name(), grid.start)?;
    let points = grid.points();
    let rows: Vec<(f64, Result<Reports, CliError>)> = points
        .par_iter()
        .map(|&x| {
            let r = s
                .desc
                .with_param(var.name(), x)
                .map_err(CliError::from)
                .and_then(|d| reports(&d, s.pair));
            (x, r)
        })
        .collect();
    let mut out = format!(
        "# config state={} var={} grid={} pair={}\nparameter,lhs4,rhs4,margin4,lhsDuan,rhsDuan,marginDuan\n",
        s.text,
        var.name(),
        grid,
        s.pair
    );
    let nan = f64::NAN;
    for (x, r) in rows {
        let (f, d) = match r {
            Ok((f, d)) => (
                [f.lhs, f.rhs, f.margin],
                d.map_or([nan; 3], |d| [d.lhs, d.rhs, d.margin]),
            ),
            Err(e) => {
                eprintln!("warning: {}={x}: {}", var.name(), e.message());
                ([nan; 3], [nan; 3])
            }
        };
        writeln!(
            out,
            "{x},{},{},{},{},{},{}",
            f[0], f[1], f[2], d[0], d[1], d[2]
        )
        .unwrap();
    }
    write_text(output.as_deref(), &out)
}

pub struct Search {
    pub var: SweepVar,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub criterion: CriterionArg,
}

pub fn threshold(s: &Resolved, search: &Search, output: Option<PathBuf>) -> Result<(), CliError> {
    let margin = |x: f64| -> cvwitness::Result<f64> {
        let c = compute_cumulant_set(&s.desc.with_param(search.var.name(), x)?.build()?, s.pair)?;
        match search.criterion {
            CriterionArg::Fourth => Ok(fourth_order_witness(&c).margin),
            CriterionArg::Duan => Ok(duan_witness(&c, s.pair.g1)?.margin),
        }
    };
    let criterion = match search.criterion {
        CriterionArg::Fourth => "fourth-order",
        CriterionArg::Duan => "duan",
    };
    let root = find_threshold(margin, search.lo, search.hi, search.tol)?;
    println!(
        "{} crossing for {}: {}={root:.6}",
        criterion,
        s.text,
        search.var.name()
    );
    if let Some(path) = output {
        let text = format!(
            "# config state={} pair={}\nvar,lo,hi,tol,criterion,crossing\n{},{},{},{},{},{}\n",
            s.text,
            s.pair,
            search.var.name(),
            search.lo,
            search.hi,
            search.tol,
            criterion,
            root
        );
        write_text(Some(&path), &text)?;
    }
    Ok(())
}

fn file_name(layout: Layout) -> String {
    format!("{layout}.csv")
}

pub fn sample(s: &Resolved, count: usize, seed: u64, dir: &Path) -> Result<(), CliError> {
    if count < sampling::MIN_SAMPLES {
        return Err(CliError::Config(format!(
            "--samples {count} is below the minimum of {}",
            sampling::MIN_SAMPLES
        )));
    }
    let state = s.desc.build()?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    for (layout, idx, extra) in [
        (Layout::Xx, [0usize, 2], 0.0),
        (Layout::Pp, [1, 3], 0.0),
        (Layout::Het1, [0, 1], 0.5),
        (Layout::Het2, [2, 3], 0.5),
    ] {
        let rate = SignedMixture::marginal(&state, &idx, extra)?.acceptance_rate();
        eprintln!("{layout}: expected acceptance rate {rate:.4}");
    }
    let sets = sampling::sample_all(&state, count, seed, &s.text)?;
    for set in &sets {
        let path = dir.join(file_name(set.layout));
        let f = File::create(&path)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        set.write_csv(&mut w)?;
        w.flush().map_err(|e| CliError::Run(e.to_string()))?;
        println!("wrote {} ({} samples)", path.display(), set.len());
    }
    Ok(())
}

fn read_set(dir: &Path, layout: Layout) -> Result<QuadratureSamples, CliError> {
    let path = dir.join(file_name(layout));
    let f = File::open(&path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let set = QuadratureSamples::read_csv(BufReader::new(f))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if set.layout != layout {
        return Err(CliError::Config(format!(
            "{} holds `{}` samples, expected `{layout}`",
            path.display(),
            set.layout
        )));
    }
    Ok(set)
}

fn verdict_line(name: &str, r: &WitnessReport, se: f64) {
    println!(
        "{name:<14}lhs={:.6} rhs={:.6} margin={:.6} ± {se:.6}  {}",
        r.lhs,
        r.rhs,
        r.margin,
        r.verdict()
    );
}

fn agreement(analytic: f64, estimate: f64, se: f64) -> &'static str {
    if analytic.abs() <= 5.0 * se {
        "within 5 s.e. of zero, no verdict comparison"
    } else if (analytic < 0.0) == (estimate < 0.0) {
        "verdicts agree"
    } else {
        "VERDICTS DISAGREE"
    }
}

pub fn estimate(dir: &Path, pair: EprOperatorPair) -> Result<(), CliError> {
    let sets: Vec<QuadratureSamples> = Layout::ALL
        .iter()
        .map(|&l| read_set(dir, l))
        .collect::<Result<_, _>>()?;
    let state_text = sets[0].state.clone();
    if sets.iter().any(|s| s.state != state_text) {
        eprintln!("warning: sample files were drawn from different states");
    }
    let est: EstimatedCumulantSet =
        sampling::estimate_cumulant_set(&sets[0], &sets[1], &sets[2], &sets[3], pair)?;
    println!("state: {state_text}");
    println!("pair:  {pair}");
    println!("samples per file: {}", sets[0].len());
    println!("{:<10}{:>16}{:>14}", "field", "estimate", "std.err");
    for (i, (name, v)) in est.value.fields().enumerate() {
        println!("{name:<10}{v:>16.8}{:>14.8}", est.std_error[i]);
    }
    let fourth = fourth_order_witness(&est.value);
    let se4 = est.fourth_order_margin_se();
    verdict_line("fourth-order", &fourth, se4);
    let duan = est.duan();
    let sed = est.duan_margin_se();
    if let Some(d) = &duan {
        verdict_line("duan", d, sed);
    }

    let analytic: Option<CumulantSet> = state_text
        .parse::<StateDescriptor>()
        .ok()
        .and_then(|d| d.build().ok())
        .and_then(|s| compute_cumulant_set(&s, pair).ok());
    if let Some(c) = analytic {
        let a4 = fourth_order_witness(&c);
        println!(
            "analytic      fourth-order margin={:.6}  {}",
            a4.margin,
            agreement(a4.margin, fourth.margin, se4)
        );
        if let (Ok(ad), Some(d)) = (duan_witness(&c, pair.g1), &duan) {
            println!(
                "analytic      duan margin={:.6}  {}",
                ad.margin,
                agreement(ad.margin, d.margin, sed)
            );
        }
    }
    Ok(())
}

pub fn oracle(s: &Resolved, cutoff: Option<usize>) -> Result<(), CliError> {
    let cutoff = cutoff.unwrap_or_else(|| oracle::suggested_cutoff(&s.desc));
    let fock = oracle::build_fock(&s.desc, cutoff)?;
    let a = compute_cumulant_set(&s.desc.build()?, s.pair)?;
    let b = fock.cumulant_set(s.pair)?;
    println!(
        "state: {}  cutoff: {cutoff}  leakage: {:.3e}",
        s.text,
        fock.leakage()
    );
    println!(
        "{:<10}{:>20}{:>20}{:>12}",
        "field", "phase space", "oracle", "|diff|"
    );
    for ((name, x), (_, y)) in a.fields().zip(b.fields()) {
        println!("{name:<10}{x:>20.12}{y:>20.12}{:>12.3e}", (x - y).abs());
    }
    for mode in 0..2 {
        println!(
            "mode {mode}: uncertainty margin {:.6e}, min eigenvalue {:.3e}",
            fock.fourth_moment_uncertainty_margin(mode)?,
            fock.min_eigenvalue(mode)?
        );
    }
    Ok(())
}
