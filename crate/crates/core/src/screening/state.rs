use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use super::ScreeningError;
use crate::baseline::{solve_base_state, traceback_verify, TracebackReport};
use crate::he::HeConfig;
use crate::network::{build_contingency_delta, scale_loading, ContingencyEntry, EffectiveY, GridCase, PfState, PowerFlowModel};

/// Bus voltages as `bus_id,vm,va_deg`, one row per bus in model order.
pub fn write_state_csv(model: &PowerFlowModel, state: &PfState) -> String {
    let mut s = String::from("bus_id,vm,va_deg\n");
    for (id, v) in model.ids.iter().zip(&state.v) {
        let _ = writeln!(s, "{id},{:?},{:?}", v.norm(), v.arg().to_degrees());
    }
    s
}

/// Reads a state written by [`write_state_csv`]; PV reactive injections are recomputed under `y`.
pub fn parse_state_csv(model: &PowerFlowModel, y: &EffectiveY<'_>, text: &str) -> Result<PfState, ScreeningError> {
    let pos: HashMap<usize, usize> = model.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut v: Vec<Option<Complex64>> = vec![None; model.n_total()];
    let bad = |line: usize, msg: String| ScreeningError::Input(format!("state line {}: {msg}", line + 1));
    for (k, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad(k, "expected bus_id,vm,va_deg".into()));
        }
        let id: usize = f[0].parse().map_err(|_| bad(k, format!("invalid bus id `{}`", f[0])))?;
        let vm: f64 = f[1].parse().map_err(|_| bad(k, format!("invalid magnitude `{}`", f[1])))?;
        let va: f64 = f[2].parse().map_err(|_| bad(k, format!("invalid angle `{}`", f[2])))?;
        let i = *pos.get(&id).ok_or_else(|| bad(k, format!("unknown bus {id}")))?;
        if v[i].replace(Complex64::from_polar(vm, va.to_radians())).is_some() {
            return Err(bad(k, format!("bus {id} listed twice")));
        }
    }
    let v: Vec<Complex64> = v
        .into_iter()
        .enumerate()
        .map(|(i, x)| x.ok_or_else(|| ScreeningError::Input(format!("state misses bus {}", model.ids[i]))))
        .collect::<Result<_, _>>()?;
    let q_pv = model.pv_reactive(y, &v);
    Ok(PfState { v, q_pv })
}

/// Tracebacks a candidate post-outage state of `entry` to the pre-contingency solution.
pub fn verify_state(case: &GridCase, entry: &ContingencyEntry, state_csv: &str, cfg: &HeConfig) -> Result<TracebackReport, ScreeningError> {
    let input = |e: String| ScreeningError::Input(e);
    let case = scale_loading(case, entry.load_scale.unwrap_or(1.0)).map_err(|e| input(e.to_string()))?;
    let model = PowerFlowModel::new(&case).map_err(|e| input(e.to_string()))?;
    let base = solve_base_state(&model).map_err(input)?;
    let spec = build_contingency_delta(&case, &entry.id, &entry.outages).map_err(|e| input(e.to_string()))?;
    let post = EffectiveY::new(&model.y, &spec.delta_y, 1.0);
    let candidate = parse_state_csv(&model, &post, state_csv)?;
    traceback_verify(&model, &base, &spec, &candidate, cfg).map_err(|e| input(e.to_string()))
}
