//! CSV formats for instances, schedules, energy functions, transition graphs,
//! measurements and trajectories. Lines starting with `#` are comments.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::baseline::{Mode, Transition, TransitionGraph};
use crate::energy::PiecewiseLinearConcave;
use crate::furnace::{Measurement, Trajectory};
use crate::instances::{Instance, Schedule, Task, Time};
use crate::{Error, Result};

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).has_headers(true).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    let got: Vec<&str> = h.iter().collect();
    if got != expected {
        return Err(Error::Parse(format!("expected header `{}`, found `{}`", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let raw = rec.get(i).ok_or_else(|| Error::Parse(format!("line {line}: missing `{name}`")))?;
    raw.parse().map_err(|_| Error::Parse(format!("line {line}: bad `{name}` value `{raw}`")))
}

fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

pub fn open(path: impl AsRef<Path>) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn create(path: impl AsRef<Path>) -> Result<std::io::BufWriter<File>> {
    Ok(std::io::BufWriter::new(File::create(path)?))
}

pub fn read_instance<R: Read>(r: R) -> Result<Instance> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &["release", "deadline", "processing"])?;
    let mut tasks = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        tasks.push(Task::new(
            field::<Time>(&rec, 0, "release")?,
            field::<Time>(&rec, 1, "deadline")?,
            field::<Time>(&rec, 2, "processing")?,
        ));
    }
    Instance::new(tasks)
}

pub fn write_instance<W: Write>(mut w: W, instance: &Instance, comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "release,deadline,processing")?;
    for t in instance.tasks() {
        writeln!(w, "{},{},{}", t.release, t.deadline, t.processing)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows may appear in any order; tasks are numbered from 1.
pub fn read_schedule<R: Read>(r: R) -> Result<Schedule> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &["task", "start"])?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push((field(&rec, 0, "task")?, field(&rec, 1, "start")?));
    }
    rows.sort_by_key(|r| r.0);
    for (k, (task, _)) in rows.iter().enumerate() {
        if *task != k + 1 {
            return Err(Error::Parse(format!("schedule tasks must be numbered 1..{}", rows.len())));
        }
    }
    Ok(Schedule::new(rows.into_iter().map(|r| r.1).collect()))
}

pub fn write_schedule<W: Write>(mut w: W, schedule: &Schedule, comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "task,start")?;
    for (k, s) in schedule.starts().iter().enumerate() {
        writeln!(w, "{},{}", k + 1, s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_energy_function<R: Read>(r: R) -> Result<PiecewiseLinearConcave> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &["delta", "energy"])?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        pts.push((field(&rec, 0, "delta")?, field(&rec, 1, "energy")?));
    }
    PiecewiseLinearConcave::new(pts)
}

pub fn write_energy_function<W: Write>(mut w: W, f: &PiecewiseLinearConcave, comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "delta,energy")?;
    for (x, y) in f.breakpoints() {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}

/// Two sections, `modes:` (rows `name,power`) and `transitions:` (rows
/// `from,to,duration,energy` with modes given by name or 0-based index).
/// The first mode is the processing mode. Column header rows are optional.
pub fn read_transition_graph<R: Read>(r: R) -> Result<TransitionGraph> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Modes,
        Transitions,
    }
    let mut section = Section::None;
    let mut modes: Vec<Mode> = Vec::new();
    let mut raw_transitions: Vec<(usize, Vec<String>)> = Vec::new();
    for (no, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let no = no + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "modes:" => {
                section = Section::Modes;
                continue;
            }
            "transitions:" => {
                section = Section::Transitions;
                continue;
            }
            _ => {}
        }
        let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        match section {
            Section::None => return Err(Error::Parse(format!("line {no}: data outside a section"))),
            Section::Modes => {
                if cols == ["name", "power"] {
                    continue;
                }
                if cols.len() != 2 {
                    return Err(Error::Parse(format!("line {no}: expected `name,power`")));
                }
                let power = cols[1].parse().map_err(|_| Error::Parse(format!("line {no}: bad power `{}`", cols[1])))?;
                modes.push(Mode::new(cols[0].clone(), power));
            }
            Section::Transitions => {
                if cols == ["from", "to", "duration", "energy"] {
                    continue;
                }
                if cols.len() != 4 {
                    return Err(Error::Parse(format!("line {no}: expected `from,to,duration,energy`")));
                }
                raw_transitions.push((no, cols));
            }
        }
    }
    if modes.is_empty() {
        return Err(Error::Parse("transition graph has no modes".into()));
    }
    let lookup = |no: usize, key: &str| -> Result<usize> {
        modes
            .iter()
            .position(|m| m.name == key)
            .or_else(|| key.parse::<usize>().ok().filter(|&i| i < modes.len()))
            .ok_or_else(|| Error::Parse(format!("line {no}: unknown mode `{key}`")))
    };
    let mut transitions = Vec::new();
    for (no, cols) in &raw_transitions {
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("line {no}: bad number `{s}`")));
        transitions.push(Transition::new(
            lookup(*no, &cols[0])?,
            lookup(*no, &cols[1])?,
            num(&cols[2])?,
            num(&cols[3])?,
        ));
    }
    TransitionGraph::new(modes, 0, transitions)
}

pub fn write_transition_graph<W: Write>(mut w: W, g: &TransitionGraph, comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    // the processing mode is written first
    let mut order: Vec<usize> = vec![g.processing_mode()];
    order.extend((0..g.modes().len()).filter(|&m| m != g.processing_mode()));
    writeln!(w, "modes:")?;
    writeln!(w, "name,power")?;
    for &m in &order {
        writeln!(w, "{},{}", g.modes()[m].name, g.modes()[m].hold_power)?;
    }
    writeln!(w, "transitions:")?;
    writeln!(w, "from,to,duration,energy")?;
    for t in g.transitions() {
        writeln!(w, "{},{},{},{}", g.modes()[t.from].name, g.modes()[t.to].name, t.duration, t.energy)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measurements<R: Read>(r: R) -> Result<Vec<Measurement>> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &["time", "temperature", "power"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(Measurement {
            time: field(&rec, 0, "time")?,
            temperature: field(&rec, 1, "temperature")?,
            power: field(&rec, 2, "power")?,
        });
    }
    Ok(out)
}

pub fn write_measurements<W: Write>(mut w: W, series: &[Measurement], comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "time,temperature,power")?;
    for m in series {
        writeln!(w, "{},{},{}", m.time, m.temperature, m.power)?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory rows `time,temperature,power,energy` with temperature in °C.
pub fn write_trajectory<W: Write>(mut w: W, trajectory: &Trajectory, ambient: f64, comments: &[String]) -> Result<()> {
    write_comments(&mut w, comments)?;
    writeln!(w, "time,temperature,power,energy")?;
    for p in &trajectory.points {
        writeln!(w, "{},{},{},{}", p.time, p.x + ambient, p.power, p.energy)?;
    }
    w.flush()?;
    Ok(())
}
