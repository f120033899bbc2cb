//! Task runners. Each one computes everything in memory and hands back the
//! files to write, so a failed run leaves no partial artifacts.

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use tdho_core::classical::{self, OscState, Trajectory};
use tdho_core::ermakov::{self, rho_from_pair};
use tdho_core::gaussian::{self, evolve_moments, MomentState};
use tdho_core::grid2d::{
    expect_g2, grid_moments, pipeline_vs_oracle, propagate_coupled, PipelineOptions, WaveGrid2D,
};
use tdho_core::scenario::{Scenario, Task, Tolerances};
use tdho_core::{ChainSpec, Result};

use crate::csv::{indexed, num, Table};

/// Effective run settings: the scenario after command-line overrides.
#[derive(Debug, Clone)]
pub struct Run {
    pub scenario: Scenario,
    pub chain: ChainSpec,
    pub parallel: Option<usize>,
}

#[derive(Debug)]
pub struct Output {
    pub files: Vec<(String, String)>,
    /// Headline numbers, flattened into the report summary.
    pub metrics: Map<String, Value>,
    pub details: Value,
}

impl Run {
    fn window(&self) -> (f64, f64) {
        (self.scenario.window[0], self.scenario.window[1])
    }

    fn tol(&self) -> &Tolerances {
        &self.scenario.tolerances
    }

    /// Uniform output times from `t0` to `t1` inclusive.
    fn sample_times(&self) -> Vec<f64> {
        let (t0, t1) = self.window();
        let m = ((t1 - t0) / self.tol().sample).round().max(1.0) as usize;
        (0..=m)
            .map(|k| if k == m { t1 } else { t0 + (t1 - t0) * k as f64 / m as f64 })
            .collect()
    }

    /// Physical initial state: oscillator `i` starts at the packet mean of
    /// axis `i mod 2`.
    fn physical_init(&self) -> Result<OscState> {
        let c = self.scenario.packet.centre;
        let n = self.chain.n;
        OscState::new(
            (0..n).map(|i| c[i % 2]).collect(),
            (0..n).map(|i| c[2 + i % 2]).collect(),
        )
    }

    fn initial_grid(&self) -> Result<WaveGrid2D> {
        let axis = self.tol().grid.axis()?;
        let p = &self.scenario.packet;
        Ok(WaveGrid2D::gaussian(axis, axis, p.centre, p.spread))
    }

    fn initial_moments(&self) -> Result<MomentState> {
        if self.chain.n == 2 {
            let p = &self.scenario.packet;
            Ok(WaveGrid2D::gaussian_moments(p.centre, p.spread))
        } else {
            let s = self.physical_init()?;
            MomentState::coherent(&s.u, &s.du)
        }
    }

    /// Manifest shared by every task.
    pub fn manifest(&self, task: Task, out: &Output) -> Value {
        json!({
            "task": task.name(),
            "scenario": self.scenario,
            "chain": self.chain,
            "settings": {
                "ode_tol": self.tol().ode_tol,
                "dt": self.tol().dt,
                "sample": self.tol().sample,
                "grid": self.tol().grid,
                "parallel": self.parallel,
            },
            "defaults": {
                "tolerances": Tolerances::default(),
                "pipeline": PipelineOptions::default(),
                "output_root": crate::DEFAULT_ROOT,
                "output_root_env": crate::OUT_ENV,
            },
            "metrics": out.metrics,
            "details": out.details,
        })
    }

    pub fn execute(&self, task: Task) -> Result<Output> {
        match task {
            Task::Simulate => self.simulate(),
            Task::Invariants => self.invariants(),
            Task::Ermakov => self.ermakov(),
            Task::Gaussian => self.gaussian(),
            Task::Oracle2d => self.oracle2d(),
            Task::Pipeline => self.pipeline(),
            Task::Report => self.report(),
        }
    }

    fn trajectory_csv(&self, traj: &Trajectory) -> Result<String> {
        let n = traj.n();
        let mut header = vec!["t".to_string()];
        header.extend(indexed("u", n));
        header.extend(indexed("du", n));
        let mut t = Table::new(&header);
        let mut row = vec![0.0; 2 * n + 1];
        for time in self.sample_times() {
            row[0] = time;
            traj.flat_at(time, &mut row[1..])?;
            t.row(&row);
        }
        Ok(t.finish())
    }

    fn simulate(&self) -> Result<Output> {
        let (t0, t1) = self.window();
        let tol = self.tol().ode_tol;
        let (u, v) = classical::orthogonal_pair(&self.chain, t0, t1, tol)?;
        let phys = classical::integrate(&self.chain, &self.physical_init()?, t0, t1, tol)?;
        let mut metrics = Map::new();
        metrics.insert("steps_u".into(), json!(u.times().len() - 1));
        metrics.insert("steps_v".into(), json!(v.times().len() - 1));
        metrics.insert("steps_physical".into(), json!(phys.times().len() - 1));
        Ok(Output {
            files: vec![
                ("u.csv".into(), self.trajectory_csv(&u)?),
                ("v.csv".into(), self.trajectory_csv(&v)?),
                ("physical.csv".into(), self.trajectory_csv(&phys)?),
            ],
            metrics,
            details: json!({ "final_physical": phys.at(t1)? }),
        })
    }

    fn invariants(&self) -> Result<Output> {
        let (t0, t1) = self.window();
        let tol = self.tol().ode_tol;
        let (u, v) = classical::orthogonal_pair(&self.chain, t0, t1, tol)?;
        let g0 = classical::invariant_classical(&u, &v, t0)?;
        let scale = g0.abs().max(1.0);
        let mut table = Table::with_header("t,G,drift");
        for t in self.sample_times() {
            let g = classical::invariant_classical(&u, &v, t)?;
            table.row(&[t, g, (g - g0).abs() / scale]);
        }
        let mut metrics = Map::new();
        metrics.insert("g_initial".into(), json!(g0));
        metrics.insert("g_drift".into(), json!(classical::invariant_drift(&u, &v)?));
        let mut files = vec![("g.csv".to_string(), table.finish())];

        if self.chain.n == 2 {
            let phys = classical::integrate(&self.chain, &self.physical_init()?, t0, t1, tol)?;
            let rep = classical::pair_invariants(&u, &phys)?;
            let mut pt = Table::with_header("t,G_x,G_y,G_sum,F,K");
            for k in 0..rep.times.len() {
                pt.row(&[rep.times[k], rep.g_x[k], rep.g_y[k], rep.g_sum[k], rep.f[k], rep.k[k]]);
            }
            files.push(("pair.csv".into(), pt.finish()));
            metrics.insert("pair_sum_drift".into(), json!(rep.sum_drift()));
            metrics.insert("pair_x_drift".into(), json!(rep.x_drift()));
            metrics.insert("pair_y_drift".into(), json!(rep.y_drift()));
            metrics.insert("pair_cancellation".into(), json!(rep.cancellation_error()));
        }
        Ok(Output {
            files,
            metrics,
            details: Value::Null,
        })
    }

    fn ermakov(&self) -> Result<Output> {
        let (t0, t1) = self.window();
        let tol = self.tol().ode_tol;
        let init = self.physical_init()?;
        let mut files = Vec::new();
        let mut metrics = Map::new();
        let mut per = Vec::new();
        for i in 0..self.chain.n {
            let single = ChainSpec::new(vec![self.chain.omega_sq[i].clone()], vec![])?;
            // v̇(t0) = Ω(t0) makes ρ ≡ Ω^{-1/2} when the frequency is constant.
            let w2 = single.omega_sq[0].eval(t0)?;
            let w0 = if w2 > 0.0 { w2.sqrt() } else { 1.0 };
            let a = classical::integrate(&single, &OscState::new(vec![1.0], vec![0.0])?, t0, t1, tol)?;
            let b = classical::integrate(&single, &OscState::new(vec![0.0], vec![w0])?, t0, t1, tol)?;
            let ap = rho_from_pair(&a, &b, ermakov::DEFAULT_SPACING)?;
            let res = ap.residual_series(&single.omega_sq[0])?;
            let mut table = Table::with_header("t,rho,theta,residual");
            for k in 0..ap.times.len() {
                table.row_opt(&[Some(ap.times[k]), Some(ap.rho[k]), Some(ap.theta[k]), res[k]]);
            }
            files.push((format!("ermakov_{}.csv", i + 1), table.finish()));

            let start = OscState::new(vec![init.u[i]], vec![init.du[i]])?;
            let phys = classical::integrate(&single, &start, t0, t1, tol)?;
            let mut lt = Table::with_header("t,x,p,lewis");
            let mut values = Vec::new();
            for t in self.sample_times() {
                let s = phys.at(t)?;
                let l = ermakov::lewis_value(&ap, s.u[0], s.du[0], t)?;
                values.push(l);
                lt.row(&[t, s.u[0], s.du[0], l]);
            }
            files.push((format!("lewis_{}.csv", i + 1), lt.finish()));

            let residual = ermakov::ermakov_residual(&ap, &single.omega_sq[0])?;
            let drift = classical::relative_drift(values.iter().copied());
            per.push(json!({
                "oscillator": i + 1,
                "wronskian": ap.wronskian,
                "residual": residual,
                "lewis_drift": drift,
            }));
            metrics.insert(format!("residual_{}", i + 1), json!(residual));
            metrics.insert(format!("lewis_drift_{}", i + 1), json!(drift));
        }
        Ok(Output {
            files,
            metrics,
            details: Value::Array(per),
        })
    }

    fn gaussian(&self) -> Result<Output> {
        let (t0, t1) = self.window();
        let tol = self.tol().ode_tol;
        let n = self.chain.n;
        let ev = evolve_moments(&self.chain, &self.initial_moments()?, t0, t1, tol)?;
        let (u, v) = classical::orthogonal_pair(&self.chain, t0, t1, tol)?;

        let mut header = vec!["t".to_string()];
        header.extend(indexed("mean", 2 * n));
        for i in 0..2 * n {
            for j in i..2 * n {
                header.push(format!("cov_{}_{}", i + 1, j + 1));
            }
        }
        let mut moments = Table::new(&header);
        let mut gt = Table::with_header("t,Re<G>,Im<G>,<GG+>");
        let (mut defect, mut min_eig) = (0.0f64, f64::INFINITY);
        let (mut g_vals, mut gg_vals) = (Vec::new(), Vec::new());
        for t in self.sample_times() {
            let ms = ev.at(t)?;
            let mut row = vec![t];
            row.extend(&ms.mean);
            for i in 0..2 * n {
                for j in i..2 * n {
                    row.push(ms.cov[(i, j)]);
                }
            }
            moments.row(&row);
            let form = gaussian::g_form_from_pair(&u, &v, t)?;
            let g = gaussian::expect_g(&form, &ms)?;
            let gg = gaussian::expect_gg_dagger(&form, &ms)?;
            gt.row(&[t, g.re, g.im, gg]);
            g_vals.push(g);
            gg_vals.push(gg);
            defect = defect.max(ev.symplectic_defect(t)?);
            min_eig = min_eig.min(ms.uncertainty_min_eigenvalue());
        }
        let g_scale = g_vals[0].norm().max(1.0);
        let g_drift = g_vals
            .iter()
            .map(|g| (g - g_vals[0]).norm() / g_scale)
            .fold(0.0, f64::max);
        let mut metrics = Map::new();
        metrics.insert("g_drift".into(), json!(g_drift));
        metrics.insert(
            "gg_dagger_drift".into(),
            json!(classical::relative_drift(gg_vals.iter().copied())),
        );
        metrics.insert("symplectic_defect".into(), json!(defect));
        metrics.insert("min_uncertainty_eigenvalue".into(), json!(min_eig));
        Ok(Output {
            files: vec![
                ("moments.csv".into(), moments.finish()),
                ("g.csv".into(), gt.finish()),
            ],
            metrics,
            details: Value::Null,
        })
    }

    fn oracle2d(&self) -> Result<Output> {
        let (t0, t1) = self.window();
        let tol = self.tol().ode_tol;
        let dt = self.tol().dt;
        let s0 = self.initial_moments()?;
        let mut psi = self.initial_grid()?;
        let (classical_mean, moments) = rayon::join(
            || {
                let s = OscState::new(s0.mean[..2].to_vec(), s0.mean[2..].to_vec())?;
                classical::integrate(&self.chain, &s, t0, t1, tol)
            },
            || evolve_moments(&self.chain, &s0, t0, t1, tol),
        );
        let (classical_mean, moments) = (classical_mean?, moments?);
        let (u, _) = classical::orthogonal_pair(&self.chain, t0, t1, tol)?;

        let mut header = vec!["t".to_string()];
        header.extend(indexed("mean", 4));
        for i in 0..4 {
            for j in i..4 {
                header.push(format!("cov_{}_{}", i + 1, j + 1));
            }
        }
        let mut mt = Table::new(&header);
        let mut gt = Table::with_header("t,Re<G2>,Im<G2>");
        let (mut mean_gap, mut cov_gap, mut g_drift) = (0.0f64, 0.0f64, 0.0f64);
        let mut g0 = None;
        let times = self.sample_times();
        for (k, &t) in times.iter().enumerate() {
            if k > 0 {
                psi = propagate_coupled(&psi, &self.chain, times[k - 1], t, dt)?;
            }
            let gm = grid_moments(&psi)?;
            let mut row = vec![t];
            row.extend(&gm.mean);
            for i in 0..4 {
                for j in i..4 {
                    row.push(gm.cov[(i, j)]);
                }
            }
            mt.row(&row);

            let c = classical_mean.at(t)?.to_flat();
            for i in 0..4 {
                mean_gap = mean_gap.max((gm.mean[i] - c[i]).abs());
            }
            cov_gap = cov_gap.max((&gm.cov - &moments.at(t)?.cov).abs().max());

            let s = u.at(t)?;
            let g = expect_g2(&psi, s.u[0], s.du[0], s.u[1], s.du[1])?;
            gt.row(&[t, g.re, g.im]);
            let base = *g0.get_or_insert(g);
            g_drift = g_drift.max((g - base).norm());
        }
        let mut metrics = Map::new();
        metrics.insert("mean_gap_vs_classical".into(), json!(mean_gap));
        metrics.insert("cov_gap_vs_gaussian".into(), json!(cov_gap));
        metrics.insert("g2_drift".into(), json!(g_drift));
        metrics.insert("final_norm".into(), json!(psi.norm_sqr()));
        Ok(Output {
            files: vec![
                ("moments.csv".into(), mt.finish()),
                ("g2.csv".into(), gt.finish()),
                ("psi_final.csv".into(), psi_csv(&psi)),
            ],
            metrics,
            details: Value::Null,
        })
    }

    fn pipeline(&self) -> Result<Output> {
        let (t0, t1) = self.window();
        let opts = PipelineOptions {
            dt: self.tol().dt,
            tol: self.tol().ode_tol,
            ..PipelineOptions::default()
        };
        let psi0 = self.initial_grid()?;
        let cmp = pipeline_vs_oracle(&self.chain, &psi0, t0, t1, &opts)?;
        let rep = &cmp.report;
        let mut ct = Table::with_header(
            "t,inv_mu,inv_nu,lam,inv_mu_closed,inv_nu_closed,lam_closed,lam_printed",
        );
        for s in &rep.coefficients {
            ct.row(&[
                s.t,
                s.inv_mu,
                s.inv_nu,
                s.lam,
                s.inv_mu_closed,
                s.inv_nu_closed,
                s.lam_closed,
                s.lam_printed,
            ]);
        }
        let mut metrics = Map::new();
        metrics.insert("fidelity".into(), json!(cmp.fidelity));
        metrics.insert("segments".into(), json!(rep.segments.len()));
        metrics.insert("max_gap_inv_mu".into(), json!(rep.max_gap[0]));
        metrics.insert("max_gap_inv_nu".into(), json!(rep.max_gap[1]));
        metrics.insert("max_gap_lam".into(), json!(rep.max_gap[2]));
        metrics.insert("lam_derived_over_printed".into(), json!(rep.lam_ratio));
        metrics.insert("final_norm".into(), json!(rep.final_norm));
        let report = json!({ "fidelity": cmp.fidelity, "report": rep });
        Ok(Output {
            files: vec![
                ("report.json".into(), pretty(&report)),
                ("coefficients.csv".into(), ct.finish()),
                ("psi_pipeline.csv".into(), psi_csv(&cmp.pipeline)),
            ],
            metrics,
            details: Value::Null,
        })
    }

    /// Tasks run by `report`: the scenario's list, or everything that
    /// applies to the chain.
    pub fn report_tasks(&self) -> Vec<Task> {
        let listed: Vec<Task> = self
            .scenario
            .tasks
            .iter()
            .copied()
            .filter(|t| *t != Task::Report)
            .collect();
        if !listed.is_empty() {
            let mut l = listed;
            l.sort();
            l.dedup();
            return l;
        }
        Task::ALL
            .into_iter()
            .filter(|t| *t != Task::Report && (self.chain.n == 2 || !t.needs_pair()))
            .collect()
    }

    fn report(&self) -> Result<Output> {
        let tasks = self.report_tasks();
        let results: Vec<(Task, Output)> = tasks
            .par_iter()
            .map(|&t| self.execute(t).map(|o| (t, o)))
            .collect::<Result<_>>()?;
        let mut files = Vec::new();
        let mut summary = Map::new();
        let mut table = String::from("task,metric,value\n");
        for (task, out) in results {
            for (name, value) in &out.metrics {
                let cell = match value {
                    Value::Number(x) if x.is_f64() => num(x.as_f64().unwrap_or(f64::NAN)),
                    other => other.to_string(),
                };
                table.push_str(&format!("{},{name},{cell}\n", task.name()));
            }
            summary.insert(task.name().into(), Value::Object(out.metrics.clone()));
            let manifest = self.manifest(task, &out);
            for (name, body) in out.files {
                files.push((format!("{}/{name}", task.name()), body));
            }
            files.push((format!("{}/manifest.json", task.name()), pretty(&manifest)));
        }
        files.push(("summary.csv".into(), table));
        files.push((
            "summary.json".into(),
            pretty(&json!({ "scenario": self.scenario.name, "tasks": summary })),
        ));
        Ok(Output {
            files,
            metrics: Map::new(),
            details: json!({ "tasks": tasks.iter().map(|t| t.name()).collect::<Vec<_>>() }),
        })
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serialises");
    s.push('\n');
    s
}

fn psi_csv(psi: &WaveGrid2D) -> String {
    let (xs, ys) = (psi.x.coords(), psi.y.coords());
    let mut t = Table::with_header("x,y,Re(psi),Im(psi)");
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let v = psi.psi[i * psi.y.n + j];
            t.row(&[*x, *y, v.re, v.im]);
        }
    }
    t.finish()
}
