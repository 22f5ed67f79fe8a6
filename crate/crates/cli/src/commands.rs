use std::path::Path;

use gqms_core::dilation::arveson_dilation_probe;
use gqms_core::graph::{c4_dihedral, c4_rotations, cycle_commutant_dim_formula};
use gqms_core::json::read_json;
use gqms_core::magic::{classify, graph_commutation_residual, group_average, random_qms_rank, verify_magic};
use gqms_core::pencil::{gqms_affine, membership_test, monic_gqms_pencil, monic_identity_exact, monic_qms_pencil};
use gqms_core::sdp::{read_sdpa_file, solve, SdpStatus};
use gqms_core::separation::{
    counterexample_search, dual_certificate, verify_certificate_json, CertificateJson, Counterexample, SearchOptions,
};
use gqms_core::{Graph, HermitianMatrix};
use serde_json::{json, Value};

use crate::io::{emit, graph_for, parse_graph, print, read_square, write};
use crate::{tolerance, Command, Group, PencilFormat, SdpCommand, SearchArgs, Verdict};

type CmdResult = Result<Verdict, String>;

fn core<T>(r: gqms_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn verdict(pass: bool) -> Verdict {
    if pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Verify { input, graph, tol } => verify(&input, graph.as_deref(), tolerance(tol)?),
        Command::Commutant { graph } => commutant(&graph),
        Command::Pencil { graph, n, s, format, out } => pencil(graph.as_deref(), n, s, format, &out),
        Command::Counterexample(args) => counterexample(&args),
        Command::Certify { check } => certify(&check),
        Command::Average { input, group, out } => average(&input, group, out.as_deref()),
        Command::Random { n, s, seed, rank, out } => {
            let x = core(random_qms_rank(n, s, rank.unwrap_or(s), seed))?;
            emit(out.as_deref(), &x.to_json())?;
            Ok(Verdict::Pass)
        }
        Command::Separate { input, variant, out } => {
            let x = read_square(&input)?;
            let cert = core(dual_certificate(&x, variant))?;
            let separates = cert.separates();
            print(&json!({
                "separates": separates,
                "objective": cert.objective,
                "solver_objective": cert.solver_objective,
                "min_eig": cert.min_eig,
                "trace": cert.trace,
                "orthogonality": cert.max_residual,
                "status": cert.status,
                "iterations": cert.iterations,
            }))?;
            if let Some(path) = out {
                let cx = Counterexample {
                    b: x,
                    certificate: cert,
                    index: 0,
                    seed: 0,
                };
                write(&path, &CertificateJson::new(&cx, variant, None))?;
            }
            Ok(verdict(separates))
        }
        Command::Probe {
            input,
            graph,
            directions,
            seed,
        } => {
            let x = read_square(&input)?;
            let g = graph_for(graph.as_deref(), x.n())?;
            let r = core(arveson_dilation_probe(&x, g.as_ref(), directions, seed))?;
            let dirs: Vec<Value> = r
                .directions
                .iter()
                .map(|d| json!({"status": d.status, "objective": d.objective, "beta_norm": d.beta_norm}))
                .collect();
            print(&json!({
                "max_beta_norm": r.max_beta_norm,
                "dilation_verified": r.dilation_verified,
                "failures": r.failures,
                "directions": dirs,
                "dilation": r.dilation.as_ref().map(|d| d.to_json()),
            }))?;
            Ok(verdict(r.failures == 0))
        }
        Command::Sdp {
            command: SdpCommand::Solve { file, out },
        } => sdp_solve(&file, out.as_deref()),
    }
}

fn verify(input: &Path, graph: Option<&str>, tol: f64) -> CmdResult {
    let x = read_square(input)?;
    let g = graph_for(graph, x.n())?;
    let magic = core(verify_magic(&x, tol))?;
    let classes = core(classify(&x, tol))?;
    let commutation = match &g {
        Some(g) => Some(core(graph_commutation_residual(&x, g))?),
        None => None,
    };
    let membership = core(membership_test(&x, g.as_ref(), tol))?;
    let overall = magic.overall && commutation.is_none_or(|r| r <= tol);
    print(&json!({
        "overall": overall,
        "tol": tol,
        "magic": magic,
        "classes": classes,
        "graph": g.as_ref().map(|g| g.name()),
        "commutation_residual": commutation,
        "pencil_route": membership.pencil,
        "pencil_min_eig": membership.pencil_min_eig,
    }))?;
    Ok(verdict(overall))
}

fn commutant(spec: &str) -> CmdResult {
    let g = parse_graph(spec)?;
    let spectral = core(g.commutant_dimension_spectral())?;
    let nullspace = core(g.commutant_basis())?.dimension;
    let formula = spec
        .trim()
        .strip_prefix("cycle:")
        .filter(|_| g.n() >= 3)
        .map(|_| cycle_commutant_dim_formula(g.n()));
    let components = g.connected_components().count;
    let counts = match g.is_k_regular() {
        Some(_) => core(gqms_affine(&g, 1))?.graph,
        None => None,
    };
    print(&json!({
        "graph": g.name(),
        "spectral_dimension": spectral,
        "nullspace_dimension": nullspace,
        "formula_dimension": formula,
        "components": components,
        "gqms_parameters": counts.as_ref().map(|c| c.measured_parameters),
        "predicted_parameters": counts.as_ref().map(|c| c.claimed_parameters),
    }))?;
    Ok(verdict(spectral == nullspace && formula.is_none_or(|f| f == spectral)))
}

fn pencil(graph: Option<&str>, n: Option<usize>, s: usize, format: PencilFormat, out: &Path) -> CmdResult {
    let (p, plain_n) = match (graph, n) {
        (Some(spec), _) => {
            let g = parse_graph(spec)?;
            if let Some(n) = n.filter(|&n| n != g.n()) {
                return Err(format!("--n {n} does not match graph {spec} with {} vertices", g.n()));
            }
            (core(monic_gqms_pencil(&g, s))?, None)
        }
        (None, Some(n)) => (core(monic_qms_pencil(n, s))?, Some(n)),
        (None, None) => return Err("pencil needs --graph or --n".into()),
    };
    match format {
        PencilFormat::Sdpa => core(p.export_sdpa(out))?,
        PencilFormat::Json => core(p.export_json(out))?,
    }
    let at_zero = core(p.evaluate(&vec![0.0; p.var_count()]))?;
    let identity = at_zero.matrix == HermitianMatrix::identity(p.outer() * p.s);
    let exact = plain_n.map(monic_identity_exact);
    print(&json!({
        "graph": p.graph,
        "n": p.n,
        "s": p.s,
        "variables": p.var_count(),
        "outer": p.outer(),
        "identity_at_zero": identity,
        "monic_identity_exact": exact,
        "out": out.display().to_string(),
    }))?;
    Ok(verdict(identity && exact != Some(false)))
}

fn counterexample(a: &SearchArgs) -> CmdResult {
    let opts = SearchOptions {
        budget: a.budget,
        seed: a.seed,
        jobs: a.jobs.max(1),
        s: a.s,
        variant: a.variant,
        rank: a.rank.unwrap_or(a.s),
        average: !a.no_average,
        refine_steps: a.refine,
    };
    let report = core(counterexample_search(&opts))?;
    let evaluated = report.candidates.len();
    match &report.accepted {
        Some(cx) => {
            let c4 = Graph::cycle(4).expect("4-cycle");
            let cert = CertificateJson::new(cx, opts.variant, opts.average.then_some(&c4));
            if let Some(path) = &a.out {
                write(path, &cert)?;
            }
            print(&json!({
                "accepted": true,
                "candidate_index": cx.index,
                "seed": cx.seed,
                "objective": cx.certificate.objective,
                "evaluated": evaluated,
                "graph": cert.graph,
                "out": a.out.as_ref().map(|p| p.display().to_string()),
            }))?;
            Ok(Verdict::Pass)
        }
        None => {
            let best = report.best();
            print(&json!({
                "accepted": false,
                "evaluated": evaluated,
                "best_index": best.map(|b| b.0),
                "best_objective": best.map(|b| b.1),
                "seeds": report.seeds(),
            }))?;
            Ok(Verdict::Fail)
        }
    }
}

fn certify(path: &Path) -> CmdResult {
    let cert: CertificateJson = read_json(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v = core(verify_certificate_json(&cert))?;
    print(&json!({
        "valid": v.valid,
        "reasons": v.reasons,
        "check": v.check,
        "stated_objective": cert.objective,
    }))?;
    Ok(verdict(v.valid))
}

fn average(input: &Path, group: Group, out: Option<&Path>) -> CmdResult {
    let x = read_square(input)?;
    if x.n() != 4 {
        return Err(format!("{:?} averaging needs n = 4, got n = {}", group, x.n()));
    }
    let perms = match group {
        Group::C4 => c4_rotations(),
        Group::D4 => c4_dihedral(),
    };
    let c4 = Graph::cycle(4).expect("4-cycle");
    let before = core(graph_commutation_residual(&x, &c4))?;
    let y = core(group_average(&x, &perms))?;
    let after = core(graph_commutation_residual(&y, &c4))?;
    if let Some(p) = out {
        write(p, &y.to_json())?;
    }
    print(&json!({
        "group": format!("{group:?}").to_lowercase(),
        "commutation_residual_before": before,
        "commutation_residual_after": after,
        "magic_residual_after": y.magic_residual(),
        "square": if out.is_none() { Some(y.to_json()) } else { None },
    }))?;
    Ok(Verdict::Pass)
}

fn sdp_solve(file: &Path, out: Option<&Path>) -> CmdResult {
    let p = read_sdpa_file(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let sol = core(solve(&p))?;
    print(&json!({
        "status": sol.status,
        "objective": sol.objective,
        "dual_objective": sol.dual_objective,
        "residual": sol.residual,
        "min_eig": sol.min_eig,
        "iterations": sol.iterations,
        "dropped_constraints": sol.dropped,
        "blocks": p.blocks,
        "constraints": p.constraints.len(),
    }))?;
    if let Some(path) = out {
        let blocks: Vec<Vec<Vec<f64>>> = sol
            .primal
            .iter()
            .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
            .collect();
        write(path, &json!({"primal": blocks, "dual": sol.dual}))?;
    }
    Ok(verdict(sol.status == SdpStatus::Optimal))
}
