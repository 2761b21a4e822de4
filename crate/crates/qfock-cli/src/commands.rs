//! One function per subcommand. Each returns an [`Outcome`] holding the
//! JSON artifact, an optional CSV rendering, and the exit status.

use std::fmt::Write as _;

use qfock::factorization::RegionSplit;
use qfock::fock::{
    exists_exponential, exp_inner_closed, exp_inner_series, series_trajectory, InnerProductTable,
};
use qfock::gram::gram_matrix_jobs;
use qfock::num::{rational_string, C64};
use qfock::schema::AnyFunction;
use qfock::stepfn::{CellId, IntervalSpec, MeasuredCellFunction};
use qfock::{Error, Result};
use serde_json::{json, Value};

use crate::job::{Effective, JobFile};
use crate::output::{c64_json, float_csv, float_json, Outcome};
use crate::verify;

fn named_function(file: &JobFile, role: &str, option: &Option<String>) -> Result<AnyFunction> {
    let name = option.as_deref().unwrap_or(role);
    file.function(name)
}

fn fg(file: &JobFile) -> Result<(AnyFunction, AnyFunction)> {
    Ok((
        named_function(file, "f", &file.options.f)?,
        named_function(file, "g", &file.options.g)?,
    ))
}

pub fn inner(file: &JobFile, eff: &Effective) -> Result<Outcome> {
    let n = eff.require_n()?;
    let (f, g) = fg(file)?;
    let exact = f.is_exact() && g.is_exact() && file.c.is_exact();
    let mut values = Vec::with_capacity(n as usize + 1);
    let mut csv = String::from("n,re,im\n");
    if exact {
        let table = InnerProductTable::build(
            f.as_exact().expect("checked"),
            g.as_exact().expect("checked"),
            n,
            &file.c_exact()?,
        )?;
        for (k, v) in table.values().iter().enumerate() {
            values.push(json!({
                "im": rational_string(&v.im),
                "n": k,
                "re": rational_string(&v.re),
            }));
            let _ = writeln!(csv, "{k},{},{}", rational_string(&v.re), rational_string(&v.im));
        }
    } else {
        let table = InnerProductTable::build(&f.to_float(), &g.to_float(), n, &file.c_f64())?;
        for (k, v) in table.values().iter().enumerate() {
            values.push(json!({ "im": float_json(v.im), "n": k, "re": float_json(v.re) }));
            let _ = writeln!(csv, "{k},{},{}", float_csv(v.re), float_csv(v.im));
        }
    }
    let json = json!({
        "c": file.c,
        "command": "inner",
        "exact": exact,
        "n": n,
        "values": values,
    });
    Ok(Outcome { json, csv: Some(csv), exit: 0 })
}

pub fn exp_inner(file: &JobFile, eff: &Effective) -> Result<Outcome> {
    let (f, g) = fg(file)?;
    let (f, g) = (f.to_float(), g.to_float());
    let c = file.c_f64();
    let (series, diag) = exp_inner_series(&f, &g, c, eff.tol, eff.n_max)?;
    let closed = exp_inner_closed(&f, &g, &c)?;
    let discrepancy = (series - closed).norm() / closed.norm().max(1.0);
    Ok(Outcome::json_only(json!({
        "c": file.c,
        "closed": c64_json(closed),
        "command": "exp-inner",
        "diagnostics": {
            "converged": diag.converged,
            "ratio_estimate": float_json(diag.ratio_estimate),
            "tail_bound": float_json(diag.tail_bound),
            "truncation_order": diag.truncation_order,
        },
        "discrepancy": float_json(discrepancy),
        "series": c64_json(series),
        "tol": float_json(eff.tol),
    })))
}

pub fn exists(file: &JobFile) -> Result<Outcome> {
    if file.functions.is_empty() {
        return Err(Error::ParseError("exists needs at least one function".into()));
    }
    let mut verdicts = serde_json::Map::new();
    let mut csv = String::from("name,exists,sup_norm,margin\n");
    for (name, f) in file.all_functions()? {
        let v = match &f {
            AnyFunction::Exact(f) => exists_exponential(f),
            AnyFunction::Float(f) => exists_exponential(f),
        };
        verdicts.insert(
            name.clone(),
            json!({
                "exists": v.exists,
                "margin": float_json(v.margin),
                "sup_norm": float_json(v.sup_norm),
            }),
        );
        let _ = writeln!(csv, "{name},{},{},{}", v.exists, float_csv(v.sup_norm), float_csv(v.margin));
    }
    let json = json!({ "command": "exists", "verdicts": Value::Object(verdicts) });
    Ok(Outcome { json, csv: Some(csv), exit: 0 })
}

fn complex_matrix_json(m: &nalgebra::DMatrix<C64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| c64_json(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn gram(file: &JobFile, eff: &Effective) -> Result<Outcome> {
    let family: Vec<String> = match &file.options.family {
        Some(names) => names.clone(),
        None => file.functions.keys().cloned().collect(),
    };
    if family.is_empty() {
        return Err(Error::ParseError("gram needs at least one function".into()));
    }
    let fns: Vec<AnyFunction> = family
        .iter()
        .map(|name| file.function(name))
        .collect::<Result<_>>()?;
    let all_exact = file.c.is_exact() && fns.iter().all(|f| f.is_exact());
    let report = if all_exact {
        let exact: Vec<_> = fns
            .iter()
            .map(|f| f.as_exact().expect("checked").clone())
            .collect();
        gram_matrix_jobs(&exact, &file.c_exact()?, eff.tol, eff.jobs)?
    } else {
        let floats: Vec<_> = fns.iter().map(AnyFunction::to_float).collect();
        gram_matrix_jobs(&floats, &file.c_f64(), eff.tol, eff.jobs)?
    };

    let mut csv = String::from("i,j,re,im\n");
    for i in 0..report.matrix.nrows() {
        for j in 0..report.matrix.ncols() {
            let z = report.matrix[(i, j)];
            let _ = writeln!(csv, "{i},{j},{},{}", float_csv(z.re), float_csv(z.im));
        }
    }
    let json = json!({
        "c": file.c,
        "command": "gram",
        "family": family,
        "independent": report.independent,
        "kernel_matrix": complex_matrix_json(&report.kernel_matrix),
        "matrix": complex_matrix_json(&report.matrix),
        "min_eigenvalue": float_json(report.min_eigenvalue),
        "pairwise_distinct": report.pairwise_distinct,
        "psd": report.psd,
        "spectral_norm": float_json(report.spectral_norm),
        "tol": float_json(report.tol),
    });
    Ok(Outcome { json, csv: Some(csv), exit: 0 })
}

pub fn run_verify(file: &JobFile, eff: &Effective) -> Result<Outcome> {
    let c = file.c_exact()?;
    let mut results = verify::run_suite(&c, eff.seed, eff.jobs);
    if let Some(parts) = &file.options.split {
        results.push(spec_factorization(file, parts)?);
    }
    let all_pass = results.iter().all(|r| r.pass);
    let properties: Vec<Value> = results
        .iter()
        .map(|r| json!({ "detail": r.detail, "name": r.name, "pass": r.pass }))
        .collect();
    let json = json!({
        "all_pass": all_pass,
        "command": "verify",
        "properties": properties,
        "seed": eff.seed,
    });
    Ok(Outcome { json, csv: None, exit: if all_pass { 0 } else { 1 } })
}

fn split_from_options(parts: &[Vec<String>]) -> Result<RegionSplit> {
    RegionSplit::new(
        parts
            .iter()
            .map(|ids| ids.iter().map(|s| CellId(s.clone())).collect())
            .collect(),
    )
}

/// Extra `verify` case when the spec file names a split: the f/g pair must
/// factorize over it, exactly per order when the inputs are exact, and at
/// the exponential level in floats.
fn spec_factorization(file: &JobFile, parts: &[Vec<String>]) -> Result<verify::PropertyResult> {
    use qfock::factorization::{check_exponential_factorization, check_order_n_factorization};

    let split = split_from_options(parts)?;
    let (f, g) = fg(file)?;
    let mut pass = true;
    let mut detail = String::from("exponential level within 1e-10");
    if let (Some(fe), Some(ge), Ok(c)) = (f.as_exact(), g.as_exact(), file.c_exact()) {
        if split.parts().len() == 2 {
            for n in 1..=3 {
                let check = check_order_n_factorization(fe, ge, &split, n, &c)?;
                if !num_traits::Zero::is_zero(&check.discrepancy()) {
                    pass = false;
                    detail = format!("order {n} does not factor over the split");
                }
            }
            detail = if pass {
                "orders 1..=3 exact; exponential level within 1e-10".into()
            } else {
                detail
            };
        }
    }
    let report =
        check_exponential_factorization(&f.to_float(), &g.to_float(), &split, &file.c_f64(), 1e-10)?;
    if !report.ok {
        pass = false;
        detail = format!(
            "exponential level off: closed rel {} series rel {}",
            report.closed_rel_error, report.series_rel_error
        );
    }
    Ok(verify::PropertyResult { name: "spec_factorization", pass, detail })
}

pub fn scan_boundary(file: &JobFile, eff: &Effective) -> Result<Outcome> {
    let rho_min = file.options.rho_min.unwrap_or(0.05);
    let rho_max = file.options.rho_max.unwrap_or(0.5);
    let steps = file.options.rho_steps.unwrap_or(10);
    if !(rho_min.is_finite() && rho_max.is_finite()) || rho_min < 0.0 || rho_max < rho_min {
        return Err(Error::ParseError(format!(
            "need 0 <= rho_min <= rho_max, got [{rho_min}, {rho_max}]"
        )));
    }
    if steps == 0 {
        return Err(Error::ParseError("rho_steps must be at least 1".into()));
    }
    let c = file.c_f64();
    let rhos: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                rho_min
            } else {
                rho_min + (rho_max - rho_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();

    let trace = |rho: f64| -> Result<Vec<qfock::fock::TrajectoryPoint>> {
        let spec = IntervalSpec::new().push(0.0, 1.0, C64::new(rho, 0.0));
        let f = MeasuredCellFunction::from_intervals(&spec)?;
        series_trajectory(&f, &f, c, eff.n_max)
    };

    let mut slots: Vec<Option<Result<Vec<qfock::fock::TrajectoryPoint>>>> = Vec::new();
    slots.resize_with(rhos.len(), || None);
    let workers = eff.jobs.max(1).min(rhos.len().max(1));
    if workers <= 1 {
        for (slot, &rho) in slots.iter_mut().zip(&rhos) {
            *slot = Some(trace(rho));
        }
    } else {
        let chunk = rhos.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (rho_chunk, slot_chunk) in rhos.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                let trace = &trace;
                scope.spawn(move || {
                    for (slot, &rho) in slot_chunk.iter_mut().zip(rho_chunk) {
                        *slot = Some(trace(rho));
                    }
                });
            }
        });
    }

    let mut csv = String::from("rho,n,partial_sum,term,tail_bound\n");
    let mut rows = Vec::new();
    for (&rho, slot) in rhos.iter().zip(slots) {
        let points = slot.expect("every rho traced")?;
        for p in points {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                float_csv(rho),
                p.n,
                float_csv(p.partial_sum.re),
                float_csv(p.term.re),
                float_csv(p.tail_bound)
            );
            rows.push(json!({
                "n": p.n,
                "partial_sum": float_json(p.partial_sum.re),
                "rho": float_json(rho),
                "tail_bound": float_json(p.tail_bound),
                "term": float_json(p.term.re),
            }));
        }
    }
    let json = json!({ "c": file.c, "command": "scan-boundary", "n_max": eff.n_max, "rows": rows });
    Ok(Outcome { json, csv: Some(csv), exit: 0 })
}
