use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use satrecon::declip::{
    declip_stream_with_table, frame_patterns, isolated_pattern, precompute_inverse_tables, InverseTable, WindowConfig,
};
use satrecon::harness::{
    emit_artifacts, sweep_each, trial_seed, write_histogram, write_summary, write_trials, ChannelTrace, Simulation,
    SweepSpec,
};
use satrecon::kernel::{gram_matrix, kernel_value};
use satrecon::ofdm::{OfdmConfig, Waveform};
use satrecon::presets::{preset, SimConfig, PRESET_NAMES};
use satrecon::streamio::{write_signal_csv, StreamFile};

use crate::{ConfigArgs, DeclipArgs, Failure, KernelArgs, SimOptions, SimulateArgs, SweepArgs, TablesArgs};

type Result<T> = std::result::Result<T, Failure>;

/// Opens `path` for writing, or stdout when no path is given.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn resolve_config(o: &SimOptions) -> Result<SimConfig> {
    let mut c = match (&o.preset, &o.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => SimConfig::from_toml(&std::fs::read_to_string(path)?)?,
        _ => {
            return Err(Failure::Usage(format!(
                "pass --preset ({}) or --config FILE",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    if o.mode.is_some() || o.taps.is_some() || o.carriers.is_some() || o.qam.is_some() || o.cp.is_some() {
        let mut ofdm = c.ofdm();
        if let Some(mode) = o.mode.filter(|&m| m != ofdm.mode) {
            // A mode switch invalidates the carrier layout of the other mode.
            let default = match mode {
                satrecon::ofdm::LinkMode::Wireline => OfdmConfig::wireline_default(),
                satrecon::ofdm::LinkMode::Wireless => OfdmConfig::wireless_default(),
            };
            ofdm.mode = mode;
            ofdm.carriers = default.carriers;
            ofdm.dc_zeroed = default.dc_zeroed;
        }
        if let Some(t) = o.taps {
            ofdm.taps = t;
        }
        if let Some(k) = &o.carriers {
            ofdm.carriers = k.clone();
            ofdm.dc_zeroed = !k.contains(&0);
        }
        if let Some(q) = o.qam {
            ofdm.qam = q;
        }
        if let Some(cp) = o.cp {
            ofdm.cp = cp;
        }
        c.set_ofdm(&ofdm);
    }
    if let Some(b) = o.band {
        c.band = b;
    }
    if let Some(n) = o.window_n {
        c.window_n = n;
    }
    if let Some(m) = o.margin {
        c.margin = m;
    }
    if let Some(e) = o.epsilon {
        c.epsilon = e;
    }
    if let Some(cr) = o.cr {
        c.cr = cr;
    }
    if let Some(s) = o.snr_db {
        c.snr_db = (s != f64::INFINITY).then_some(s);
    }
    if let Some(p) = &o.channel_csv {
        c.channel_csv = Some(p.clone());
    }
    if let Some(p) = o.periodic {
        c.periodic = p;
    }
    c.validate()?;
    Ok(c)
}

pub fn declip(a: &DeclipArgs) -> Result<()> {
    let file = StreamFile::read(File::open(&a.input)?)?;
    let window = WindowConfig {
        window_n: a.window_n,
        margin: a.margin.unwrap_or(a.window_n),
        epsilon: a.epsilon,
        frame_len: a.frame_len,
    };
    let table = match &a.table {
        Some(p) => Some(InverseTable::from_json(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let report = declip_stream_with_table(file.stream(), &a.band, &window, table.as_ref())?;

    let mut out = sink(a.output.as_deref())?;
    file.write_declipped(&report, &mut out)?;
    out.flush()?;
    if let Some(p) = &a.report {
        let json = serde_json::to_string_pretty(&report).map_err(|e| satrecon::Error::Io(e.to_string()))?;
        std::fs::write(p, json + "\n")?;
    }
    eprintln!(
        "{} estimated, {} skipped, {} inside the thresholds, {} table hits, max condition {:.3e}",
        report.estimates.len(),
        report.skipped_count(),
        report.inside_threshold_count,
        report.table_hits,
        report.max_condition()
    );
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let config = resolve_config(&a.sim)?;
    let sim = Simulation::new(config.clone())?;
    let seed = trial_seed(a.seed, 0, 0);
    let (result, detail) = sim.run_trial_detailed(&sim.point(), seed)?;
    emit_artifacts(std::slice::from_ref(&result), Some(&detail), &a.out_dir)?;

    let mode = sim.ofdm().mode;
    type Pick = fn(&ChannelTrace) -> &Vec<f64>;
    let dumps: [(&str, Pick); 3] = [
        ("original.csv", |t| &t.original),
        ("saturated.csv", |t| &t.saturated),
        ("declipped.csv", |t| &t.declipped),
    ];
    for (name, pick) in dumps {
        let channels = detail.channels.iter().map(|t| pick(t).clone()).collect();
        let signal = Waveform::from_channels(mode, channels)?;
        let mut w = BufWriter::new(File::create(a.out_dir.join(name))?);
        write_signal_csv(&signal, &mut w)?;
        w.flush()?;
    }
    std::fs::write(a.out_dir.join("config.toml"), config.to_toml())?;

    let mut out = sink(None)?;
    write_trials(std::slice::from_ref(&result), &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let mut spec = SweepSpec::new(resolve_config(&a.sim)?, a.axis, a.values.clone(), a.trials);
    spec.base_seed = a.seed;
    spec.workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    spec.trial_offset = a.trial_offset;
    spec.max_clipped = a.max_clipped;

    let mut trials_out = match &a.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(BufWriter::new(File::create(dir.join("trials.jsonl"))?))
        }
        None => None,
    };
    let rows = sweep_each(&spec, |row, results| {
        info!(
            "{} = {}: {} trials, BER sat {:.3e} declip {:.3e} base {:.3e}",
            row.axis,
            row.value(),
            row.trials,
            row.ber_sat(),
            row.ber_declip(),
            row.ber_base()
        );
        if let Some(w) = trials_out.as_mut() {
            write_trials(results, w)?;
        }
        Ok(())
    })?;
    match &a.out_dir {
        Some(dir) => {
            if let Some(mut w) = trials_out {
                w.flush()?;
            }
            let mut w = BufWriter::new(File::create(dir.join("summary.csv"))?);
            write_summary(&rows, &mut w)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(dir.join("histogram.csv"))?);
            write_histogram(&rows, &mut w)?;
            w.flush()?;
        }
        None => {
            let mut out = sink(None)?;
            write_summary(&rows, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Parses `start:stop:step` into the points `start, start+step, …` up to and
/// including `stop`.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Failure::Usage(format!("range `{s}` is not start:stop:step with step > 0"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

pub fn kernel(a: &KernelArgs) -> Result<()> {
    let locations = match (&a.locations, &a.range) {
        (Some(l), None) => l.clone(),
        (None, Some(r)) => parse_range(r)?,
        _ => return Err(Failure::Usage("pass --locations or --range".into())),
    };
    let mut out = sink(None)?;
    if a.curve {
        writeln!(out, "t,phi")?;
        for &t in &locations {
            writeln!(out, "{t:?},{:?}", kernel_value(&a.band, t))?;
        }
    } else {
        let g = gram_matrix(&a.band, &locations)?;
        let header: Vec<String> = locations.iter().map(|t| format!("{t:?}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for (i, t) in locations.iter().enumerate() {
            let row: Vec<String> = g.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{t:?},{}", row.join(","))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn tables(a: &TablesArgs) -> Result<()> {
    if a.window_n == 0 {
        return Err(Failure::Usage("--window-n must be at least 1".into()));
    }
    let span = a.window_n + 1 + a.margin.unwrap_or(a.window_n);
    let mut patterns = frame_patterns(a.frame_len, a.window_n, span);
    patterns.push(isolated_pattern(a.window_n));
    let table = precompute_inverse_tables(&a.band, a.window_n, a.epsilon, &patterns)?;
    info!("{} offset patterns", table.len());
    let mut out = sink(a.output.as_deref())?;
    writeln!(out, "{}", table.to_json())?;
    out.flush()?;
    Ok(())
}

pub fn config(a: &ConfigArgs) -> Result<()> {
    let c = resolve_config(&a.sim)?;
    let mut out = sink(a.output.as_deref())?;
    out.write_all(c.to_toml().as_bytes())?;
    out.flush()?;
    Ok(())
}
