//! Reader and writer for the MATPOWER case format.
//!
//! Sections `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch` are required.
//! An optional `mpc.zip` matrix with rows `bus  p_frac  i_frac  z_frac` splits bus loads.
//! Everything else (gencost, bus names, areas) is skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::case::{Branch, BranchStatus, Bus, BusKind, GridCase, ZipLoad};
use super::NetworkError;

struct Matrix {
    rows: Vec<(usize, Vec<f64>)>,
}

fn perr(line: usize, msg: impl Into<String>) -> NetworkError {
    NetworkError::Parse { line, msg: msg.into() }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(k) => &line[..k],
        None => line,
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, NetworkError> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| perr(line, format!("invalid number '{tok}'"))),
    }
}

/// Splits the file into named matrices and scalars.
fn tokenize(text: &str) -> Result<(HashMap<String, Matrix>, HashMap<String, (usize, String)>), NetworkError> {
    let mut matrices = HashMap::new();
    let mut scalars = HashMap::new();
    let lines: Vec<&str> = text.lines().collect();
    let mut k = 0;
    while k < lines.len() {
        let lineno = k + 1;
        let line = strip_comment(lines[k]).trim();
        k += 1;
        let Some(rest) = line.strip_prefix("mpc.") else { continue };
        let Some(eq) = rest.find('=') else { continue };
        let name = rest[..eq].trim().to_string();
        let value = rest[eq + 1..].trim();
        if let Some(body) = value.strip_prefix('[') {
            let mut rows = Vec::new();
            let mut current: Vec<f64> = Vec::new();
            let mut current_line = lineno;
            let mut chunk = body.to_string();
            let mut chunk_line = lineno;
            loop {
                let (content, closed) = match chunk.find(']') {
                    Some(p) => (chunk[..p].to_string(), true),
                    None => (chunk.clone(), false),
                };
                for piece in content.split_inclusive(';') {
                    let ends_row = piece.ends_with(';');
                    for tok in piece.trim_end_matches(';').split(|c: char| c.is_whitespace() || c == ',') {
                        if tok.is_empty() {
                            continue;
                        }
                        if current.is_empty() {
                            current_line = chunk_line;
                        }
                        current.push(parse_number(tok, chunk_line)?);
                    }
                    if ends_row && !current.is_empty() {
                        rows.push((current_line, std::mem::take(&mut current)));
                    }
                }
                if !current.is_empty() {
                    rows.push((current_line, std::mem::take(&mut current)));
                }
                if closed {
                    break;
                }
                if k >= lines.len() {
                    return Err(perr(lineno, format!("unterminated matrix mpc.{name}")));
                }
                chunk_line = k + 1;
                chunk = strip_comment(lines[k]).to_string();
                k += 1;
            }
            matrices.insert(name, Matrix { rows });
        } else if value.starts_with('{') {
            let mut depth_closed = value.contains('}');
            while !depth_closed {
                if k >= lines.len() {
                    return Err(perr(lineno, format!("unterminated cell array mpc.{name}")));
                }
                depth_closed = strip_comment(lines[k]).contains('}');
                k += 1;
            }
        } else {
            let v = value.trim_end_matches(';').trim().trim_matches('\'').to_string();
            scalars.insert(name, (lineno, v));
        }
    }
    Ok((matrices, scalars))
}

fn require_cols(row: &(usize, Vec<f64>), n: usize, what: &str) -> Result<(), NetworkError> {
    if row.1.len() < n {
        return Err(perr(row.0, format!("{what} row has {} columns, expected at least {n}", row.1.len())));
    }
    Ok(())
}

fn as_id(v: f64, line: usize) -> Result<usize, NetworkError> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(perr(line, format!("invalid bus id {v}")));
    }
    Ok(v as usize)
}

/// Parses MATPOWER case text; `name` labels the resulting case.
pub fn parse_case_str(text: &str, name: &str) -> Result<GridCase, NetworkError> {
    let (matrices, scalars) = tokenize(text)?;
    let (bline, base) = scalars.get("baseMVA").ok_or_else(|| perr(0, "missing mpc.baseMVA"))?;
    let base_mva = parse_number(base, *bline)?;
    if !(base_mva > 0.0) {
        return Err(perr(*bline, "baseMVA must be positive"));
    }
    let bus_m = matrices.get("bus").ok_or_else(|| perr(0, "missing mpc.bus"))?;
    let gen_m = matrices.get("gen").ok_or_else(|| perr(0, "missing mpc.gen"))?;
    let br_m = matrices.get("branch").ok_or_else(|| perr(0, "missing mpc.branch"))?;

    let mut buses = Vec::with_capacity(bus_m.rows.len());
    let mut line_of: HashMap<usize, usize> = HashMap::new();
    for row in &bus_m.rows {
        require_cols(row, 9, "bus")?;
        let r = &row.1;
        let id = as_id(r[0], row.0)?;
        let kind = match r[1] as i64 {
            1 => BusKind::PQ,
            2 => BusKind::PV,
            3 => BusKind::Slack,
            t => return Err(perr(row.0, format!("unsupported bus type {t}"))),
        };
        let vm = r[7];
        let va = r[8].to_radians();
        buses.push(Bus {
            id,
            kind,
            load: Complex64::new(r[2], r[3]) / base_mva,
            gen: Complex64::new(0.0, 0.0),
            shunt: Complex64::new(r[4], r[5]) / base_mva,
            v_sp: vm,
            v_angle_sp: if kind == BusKind::Slack { va } else { 0.0 },
            v_init: Complex64::from_polar(vm, va),
            zip: None,
            base_kv: r.get(9).copied().unwrap_or(0.0),
        });
        line_of.entry(id).or_insert(row.0);
    }
    let pos: HashMap<usize, usize> = buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
    let mut has_gen = vec![false; buses.len()];
    for row in &gen_m.rows {
        require_cols(row, 8, "gen")?;
        let r = &row.1;
        let id = as_id(r[0], row.0)?;
        let &k = pos.get(&id).ok_or_else(|| perr(row.0, format!("generator at unknown bus {id}")))?;
        if r[7] <= 0.0 {
            continue;
        }
        let b = &mut buses[k];
        b.gen += Complex64::new(r[1], r[2]) / base_mva;
        if !has_gen[k] && b.kind != BusKind::PQ {
            b.v_sp = r[5];
        }
        has_gen[k] = true;
    }
    for (k, b) in buses.iter_mut().enumerate() {
        if b.kind == BusKind::PV && !has_gen[k] {
            b.kind = BusKind::PQ;
        }
    }
    if let Some(zm) = matrices.get("zip") {
        for row in &zm.rows {
            require_cols(row, 4, "zip")?;
            let r = &row.1;
            let id = as_id(r[0], row.0)?;
            let &k = pos.get(&id).ok_or_else(|| perr(row.0, format!("zip entry for unknown bus {id}")))?;
            buses[k].zip = Some(ZipLoad { p_frac: r[1], i_frac: r[2], z_frac: r[3] });
        }
    }
    let mut branches = Vec::with_capacity(br_m.rows.len());
    for row in &br_m.rows {
        require_cols(row, 11, "branch")?;
        let r = &row.1;
        let ratio = if r[8] == 0.0 { 1.0 } else { r[8] };
        branches.push(Branch {
            from: as_id(r[0], row.0)?,
            to: as_id(r[1], row.0)?,
            circuit: 0,
            series_impedance: Complex64::new(r[2], r[3]),
            shunt_susceptance: r[4],
            tap_ratio: Complex64::from_polar(ratio, r[9].to_radians()),
            status: if r[10] > 0.0 { BranchStatus::InService } else { BranchStatus::Out },
        });
    }
    GridCase::new(name, base_mva, buses, branches)
}

/// Reads a MATPOWER `.m` case file.
pub fn parse_case(path: impl AsRef<Path>) -> Result<GridCase, NetworkError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| NetworkError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let name = path.file_stem().map_or("case".to_string(), |s| s.to_string_lossy().into_owned());
    parse_case_str(&text, &name)
}

/// Serialises a case in MATPOWER format. Parsing the output reproduces the case.
pub fn write_matpower(case: &GridCase) -> String {
    let base = case.base_mva;
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {}", case.name);
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", fmt(base));
    let _ = writeln!(s, "\n%% bus data\nmpc.bus = [");
    for b in &case.buses {
        let t = match b.kind {
            BusKind::PQ => 1,
            BusKind::PV => 2,
            BusKind::Slack => 3,
        };
        let (vm, va) = match b.kind {
            BusKind::PQ => (b.v_init.norm(), b.v_init.arg().to_degrees()),
            BusKind::PV => (b.v_sp, b.v_init.arg().to_degrees()),
            BusKind::Slack => (b.v_sp, b.v_angle_sp.to_degrees()),
        };
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t{}\t1\t1.1\t0.9;",
            b.id,
            t,
            fmt(b.load.re * base),
            fmt(b.load.im * base),
            fmt(b.shunt.re * base),
            fmt(b.shunt.im * base),
            fmt(vm),
            fmt(va),
            fmt(b.base_kv)
        );
    }
    let _ = writeln!(s, "];\n\n%% generator data\nmpc.gen = [");
    for b in &case.buses {
        if b.kind != BusKind::PQ || b.gen != Complex64::new(0.0, 0.0) {
            let vg = if b.kind == BusKind::PQ { 1.0 } else { b.v_sp };
            let _ = writeln!(
                s,
                "\t{}\t{}\t{}\t9999\t-9999\t{}\t{}\t1\t9999\t-9999;",
                b.id,
                fmt(b.gen.re * base),
                fmt(b.gen.im * base),
                fmt(vg),
                fmt(base)
            );
        }
    }
    let _ = writeln!(s, "];\n\n%% branch data\nmpc.branch = [");
    for br in &case.branches {
        let ratio = br.tap_ratio.norm();
        let shift = br.tap_ratio.arg().to_degrees();
        let ratio_col = if (ratio - 1.0).abs() == 0.0 && shift == 0.0 { 0.0 } else { ratio };
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{}\t-360\t360;",
            br.from,
            br.to,
            fmt(br.series_impedance.re),
            fmt(br.series_impedance.im),
            fmt(br.shunt_susceptance),
            fmt(ratio_col),
            fmt(shift),
            if br.in_service() { 1 } else { 0 }
        );
    }
    let _ = writeln!(s, "];");
    let zips: Vec<&Bus> = case.buses.iter().filter(|b| b.zip.is_some()).collect();
    if !zips.is_empty() {
        let _ = writeln!(s, "\n%% load split: bus p_frac i_frac z_frac\nmpc.zip = [");
        for b in zips {
            let z = b.zip.unwrap();
            let _ = writeln!(s, "\t{}\t{}\t{}\t{};", b.id, fmt(z.p_frac), fmt(z.i_frac), fmt(z.z_frac));
        }
        let _ = writeln!(s, "];");
    }
    s
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}
