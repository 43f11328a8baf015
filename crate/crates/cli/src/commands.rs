use std::path::{Path, PathBuf};

use kdx_core::density::{self, DensityModel, RidgeThreshold};
use kdx_core::gpr::{self, GprModel};
use kdx_core::hsic::{self, HsicConfig};
use kdx_core::kernels::{self, median_heuristic_gamma};
use kdx_core::svm::{self, SvmParams};
use kdx_core::toydata::{self, Target, ToySpec};
use kdx_core::{DerivField, KernelSpec};
use ndarray::{s, Array2, Axis};

use crate::args::*;
use crate::fmt::sig;
use crate::model::Model;
use crate::svg::{plane_points, render_svg, Layer};
use crate::table::{feature_header, read_csv, write_csv, write_text, Samples, Table};
use crate::CliError;

const DIGITS: usize = 8;

pub fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Kernel(c) => kernel(c),
        Command::Gpr(c) => gpr_cmd(c),
        Command::Svm(c) => svm_cmd(c),
        Command::Density(c) => density_cmd(c),
        Command::Hsic(c) => hsic_cmd(c),
    }
}

/// Key/value summary lines. They go to stdout unless the main table is
/// being written there, in which case they go to stderr.
struct Report {
    lines: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Report { lines: Vec::new() }
    }

    fn add(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} {value}"));
    }

    fn num(&mut self, key: &str, v: f64) {
        self.add(key, sig(v, DIGITS));
    }

    fn emit(self, table_on_stdout: bool) {
        for l in self.lines {
            if table_on_stdout {
                eprintln!("{l}");
            } else {
                println!("{l}");
            }
        }
    }
}

fn on_stdout(out: &Option<PathBuf>) -> bool {
    out.as_deref().is_none_or(|p| p == Path::new("-"))
}

fn samples(path: &Path) -> Result<Samples, CliError> {
    read_csv(path)?.into_samples()
}

fn require_target(s: &Samples, path: &Path) -> Result<Vec<f64>, CliError> {
    s.target
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{}: needs a `y` or `label` column", path.display())))
}

fn rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn header_with(d: usize, extra: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut h = feature_header(d);
    h.extend(extra);
    h
}

fn numbered(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |j| format!("{prefix}{j}"))
}

fn report_features(report: &mut Report, field: &DerivField) {
    for (j, v) in field.feature_sensitivity().iter().enumerate() {
        report.num(&format!("sens_x{}", j + 1), *v);
    }
}

fn write_svg(path: Option<&PathBuf>, layers: &[Layer]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, render_svg(layers)).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => Ok(()),
    }
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let spec = ToySpec::named(&a.name, a.n, a.noise, a.seed)?;
    let data = toydata::generate(&spec)?;
    let target = match data.target {
        Target::Labels => "label",
        Target::Regression | Target::Paired => "y",
    };
    let mut t = Table::new(header_with(data.x.ncols(), [target.to_string()]));
    for (mut r, y) in rows(&data.x).into_iter().zip(&data.y) {
        r.push(*y);
        t.push(r);
    }
    write_csv(a.out.as_deref(), &t)
}

fn kernel(cmd: KernelCmd) -> Result<(), CliError> {
    match cmd {
        KernelCmd::Eval(p) => {
            let k = p.kernel.spec(None)?;
            println!("{}", sig(k.eval(&p.x, &p.y)?, DIGITS));
        }
        KernelCmd::Grad(p) => {
            let k = p.kernel.spec(None)?;
            println!("{}", crate::fmt::sig_list(&k.grad_x(&p.x, &p.y)?, DIGITS));
        }
        KernelCmd::Gram { kernel, data, out } => {
            let s = samples(&data)?;
            let k = kernel.spec(None)?;
            let g = kernels::gram(&k, &s.x)?.into_inner();
            let n = g.dim();
            let mut t = Table::new(numbered("k", n).collect());
            for i in 0..n {
                t.push(g.row(i).to_vec());
            }
            write_csv(out.as_deref(), &t)?;
        }
    }
    Ok(())
}

fn scaled(base: f64, factors: &[f64]) -> Vec<f64> {
    factors.iter().map(|f| base * f).collect()
}

const GAMMA_FACTORS: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];
const NOISE_GRID: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];
const C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

fn gpr_cmd(cmd: GprCmd) -> Result<(), CliError> {
    match cmd {
        GprCmd::Fit {
            data,
            kernel,
            noise_var,
            gammas,
            noise_vars,
            folds,
            seed,
            model,
        } => {
            let s = samples(&data)?;
            let y = require_target(&s, &data)?;
            let kernels: Vec<KernelSpec> = if kernel.family == Family::Rbf && kernel.gamma.is_none() {
                let base = median_heuristic_gamma(&s.x)?;
                gammas
                    .unwrap_or_else(|| scaled(base, &GAMMA_FACTORS))
                    .into_iter()
                    .map(|g| kernel.spec(Some(g)))
                    .collect::<Result<_, _>>()?
            } else {
                if gammas.is_some() {
                    return Err(CliError::Usage("--gammas needs an RBF kernel without --gamma".into()));
                }
                vec![kernel.spec(None)?]
            };
            let noises = match noise_var {
                Some(v) if noise_vars.is_none() => vec![v],
                Some(_) => return Err(CliError::Usage("use either --noise-var or --noise-vars".into())),
                None => noise_vars.unwrap_or_else(|| NOISE_GRID.to_vec()),
            };
            let mut report = Report::new();
            let (k, nv) = if kernels.len() * noises.len() == 1 {
                (kernels[0].clone(), noises[0])
            } else {
                let mut best: Option<(KernelSpec, f64, f64)> = None;
                for k in &kernels {
                    for &nv in &noises {
                        let mse = match gpr::cross_validate(&s.x, &y, k, nv, folds, seed) {
                            Ok(v) if v.is_finite() => v,
                            Ok(_) | Err(kdx_core::Error::NotPositiveDefinite { .. }) => continue,
                            Err(e) => return Err(e.into()),
                        };
                        if best.as_ref().is_none_or(|b| mse < b.2) {
                            best = Some((k.clone(), nv, mse));
                        }
                    }
                }
                let (k, nv, mse) = best.ok_or_else(|| CliError::Usage("no candidate could be fitted".into()))?;
                report.num("cv_mse", mse);
                (k, nv)
            };
            if let KernelSpec::Rbf { gamma } = k {
                report.num("gamma", gamma);
            }
            report.num("noise_var", nv);
            let m = GprModel::fit(&s.x, &y, k, nv)?;
            Model::Gpr(m).save(&model)?;
            report.emit(false);
        }
        GprCmd::Predict(a) => {
            let m = load_gpr(&a.model)?;
            let s = samples(&a.data)?;
            let d = s.x.ncols();
            let mut t = Table::new(header_with(d, ["mean".into(), "var".into()]));
            for mut r in rows(&s.x) {
                let mean = m.predict_mean(&r)?;
                let var = m.predict_var(&r)?;
                r.extend([mean, var]);
                t.push(r);
            }
            write_csv(a.out.as_deref(), &t)?;
        }
        GprCmd::Sens(a) => {
            let m = load_gpr(&a.model)?;
            let x = match &a.data {
                Some(p) => samples(p)?.x,
                None => m.x_train().clone(),
            };
            let field = m.gradient_field(&x)?;
            let t = field_table(&x, &field, "dfdx");
            write_csv(a.out.as_deref(), &t)?;
            let mut report = Report::new();
            report_features(&mut report, &field);
            report.emit(on_stdout(&a.out));
            write_svg(a.svg.as_ref(), &arrow_layers(&x, field.values()))?;
        }
        GprCmd::Norms { model } => {
            let m = load_gpr(&model)?;
            let n = m.regularizer_norms();
            let mut report = Report::new();
            report.num("h_norm", n.h_norm);
            report.num("l2_norm", n.l2_norm);
            report.num("grad_norm", n.grad_norm);
            report.num("lap_norm", n.lap_norm);
            report.emit(false);
        }
    }
    Ok(())
}

fn field_table(x: &Array2<f64>, field: &DerivField, prefix: &str) -> Table {
    let d = x.ncols();
    let mut t = Table::new(header_with(d, numbered(prefix, field.d()).chain(["point_sens".into()])));
    let ps = field.point_sensitivity();
    for ((mut r, g), p) in rows(x).into_iter().zip(field.values().rows()).zip(ps) {
        r.extend(g.iter().copied());
        r.push(p);
        t.push(r);
    }
    t
}

fn arrow_layers(x: &Array2<f64>, grads: &Array2<f64>) -> Vec<Layer> {
    let origins = plane_points(rows(x));
    let vectors = plane_points(rows(grads));
    vec![
        Layer::Scatter {
            points: origins.clone(),
            color: "gray".into(),
        },
        Layer::Arrows { origins, vectors },
    ]
}

fn load_gpr(path: &Path) -> Result<GprModel, CliError> {
    match Model::load(path)? {
        Model::Gpr(m) => Ok(m),
        other => Err(wrong_kind(path, "gpr", other)),
    }
}

fn load_svm(path: &Path) -> Result<svm::SvmModel, CliError> {
    match Model::load(path)? {
        Model::Svm(m) => Ok(m),
        other => Err(wrong_kind(path, "svm", other)),
    }
}

fn load_density(path: &Path) -> Result<DensityModel, CliError> {
    match Model::load(path)? {
        Model::Density(m) => Ok(m),
        other => Err(wrong_kind(path, "density", other)),
    }
}

fn wrong_kind(path: &Path, want: &str, got: Model) -> CliError {
    CliError::Usage(format!("{}: expected a {want} model, found {:?}", path.display(), got.kind()))
}

fn svm_cmd(cmd: SvmCmd) -> Result<(), CliError> {
    match cmd {
        SvmCmd::Train {
            data,
            kernel,
            c,
            cs,
            gammas,
            tol,
            max_updates,
            folds,
            seed,
            model,
        } => {
            let s = samples(&data)?;
            let y = require_target(&s, &data)?;
            let kernels: Vec<KernelSpec> = if kernel.family == Family::Rbf && kernel.gamma.is_none() {
                gammas
                    .unwrap_or_else(|| vec![0.1, 0.5, 1.0, 2.0, 5.0])
                    .into_iter()
                    .map(|g| kernel.spec(Some(g)))
                    .collect::<Result<_, _>>()?
            } else {
                if gammas.is_some() {
                    return Err(CliError::Usage("--gammas needs an RBF kernel without --gamma".into()));
                }
                vec![kernel.spec(None)?]
            };
            let c_values = match c {
                Some(v) if cs.is_none() => vec![v],
                Some(_) => return Err(CliError::Usage("use either --c or --cs".into())),
                None => cs.unwrap_or_else(|| C_GRID.to_vec()),
            };
            let params = |c: f64| SvmParams {
                c,
                tol,
                max_updates,
                seed,
            };
            let mut report = Report::new();
            let (k, c) = if kernels.len() * c_values.len() == 1 {
                (kernels[0].clone(), c_values[0])
            } else {
                let mut best: Option<(KernelSpec, f64, f64)> = None;
                for &c in &c_values {
                    for k in &kernels {
                        let acc = svm::cross_validate(&s.x, &y, k, &params(c), folds, seed)?;
                        if best.as_ref().is_none_or(|b| acc > b.2) {
                            best = Some((k.clone(), c, acc));
                        }
                    }
                }
                let (k, c, acc) = best.expect("grid is not empty");
                report.num("cv_accuracy", acc);
                (k, c)
            };
            report.num("c", c);
            if let KernelSpec::Rbf { gamma } = k {
                report.num("gamma", gamma);
            }
            let fit = svm::train(&s.x, &y, k, &params(c))?;
            report.add("converged", fit.converged);
            report.add("updates", fit.updates);
            report.add("support_vectors", fit.model.sv_coef().len());
            report.num("train_accuracy", fit.model.accuracy(&s.x, &y)?);
            Model::Svm(fit.model).save(&model)?;
            report.emit(false);
        }
        SvmCmd::Predict(a) => {
            let m = load_svm(&a.model)?;
            let s = samples(&a.data)?;
            let mut t = Table::new(header_with(s.x.ncols(), ["decision".into(), "label".into()]));
            for mut r in rows(&s.x) {
                let f = m.decision(&r)?;
                r.extend([f, if f >= 0.0 { 1.0 } else { -1.0 }]);
                t.push(r);
            }
            write_csv(a.out.as_deref(), &t)?;
            if let Some(y) = &s.target {
                let mut report = Report::new();
                report.num("accuracy", m.accuracy(&s.x, y)?);
                report.emit(on_stdout(&a.out));
            }
        }
        SvmCmd::Sens { model, data, out, svg } => {
            let m = load_svm(&model)?;
            let s = samples(&data)?;
            let d = s.x.ncols();
            let mut t = Table::new(header_with(
                d,
                ["decision".to_string(), "mask".to_string()]
                    .into_iter()
                    .chain(numbered("dfdx", d))
                    .chain(numbered("grad", d)),
            ));
            let mut masks = Vec::with_capacity(s.x.nrows());
            let mut full = Array2::zeros((s.x.nrows(), d));
            for (i, mut r) in rows(&s.x).into_iter().enumerate() {
                let g = m.smooth_decision_gradient(&r)?;
                masks.push(g.mask_term);
                full.row_mut(i).assign(&ndarray::ArrayView1::from(&g.full_grad));
                r.extend([g.decision, g.mask_term]);
                r.extend(&g.kernel_grad);
                r.extend(&g.full_grad);
                t.push(r);
            }
            write_csv(out.as_deref(), &t)?;
            let field = DerivField::new(full.clone())?;
            let mut report = Report::new();
            report_features(&mut report, &field);
            report.emit(on_stdout(&out));
            let pts = plane_points(rows(&s.x));
            write_svg(
                svg.as_ref(),
                &[
                    Layer::Heat {
                        points: pts.clone(),
                        values: masks,
                    },
                    Layer::Arrows {
                        origins: pts,
                        vectors: plane_points(rows(&full)),
                    },
                ],
            )?;
        }
    }
    Ok(())
}

fn density_cmd(cmd: DensityCmd) -> Result<(), CliError> {
    match cmd {
        DensityCmd::Fit {
            data,
            kernel,
            mode,
            rank,
            model,
        } => {
            let s = samples(&data)?;
            let mode = mode.mode(rank)?;
            let default_gamma = if kernel.family == Family::Rbf && kernel.gamma.is_none() {
                Some(median_heuristic_gamma(&s.x)?)
            } else {
                None
            };
            let k = kernel.spec(default_gamma)?;
            let mut report = Report::new();
            if let KernelSpec::Rbf { gamma } = k {
                report.num("gamma", gamma);
            }
            let m = DensityModel::fit(&s.x, k, mode)?;
            Model::Density(m).save(&model)?;
            report.emit(false);
        }
        DensityCmd::Eval {
            model,
            data,
            out,
            normalized,
        } => {
            let mut m = load_density(&model)?;
            if normalized {
                let c = m
                    .normalizing_constant()
                    .ok_or_else(|| CliError::Usage("--normalized needs an RBF density".into()))?;
                m = m.scaled(c);
            }
            let s = samples(&data)?;
            let d = s.x.ncols();
            let mut t = Table::new(header_with(d, std::iter::once("density".to_string()).chain(numbered("dpdx", d))));
            let values = m.density_many(&s.x)?;
            for (mut r, p) in rows(&s.x).into_iter().zip(values) {
                let g = m.density_gradient(&r)?;
                r.push(p);
                r.extend(g);
                t.push(r);
            }
            write_csv(out.as_deref(), &t)?;
        }
        DensityCmd::Ridge {
            model,
            data,
            r_ridge,
            convention,
            quantile,
            tol,
            out,
            svg,
        } => {
            let m = load_density(&model)?;
            let x = match &data {
                Some(p) => samples(p)?.x,
                None => m.x_train().clone(),
            };
            let r = r_ridge.unwrap_or(m.dim().saturating_sub(1).max(1));
            let rule = match (quantile, tol) {
                (_, Some(tol)) => RidgeThreshold::Absolute { tol },
                (Some(q), None) => RidgeThreshold::Quantile { q },
                (None, None) => RidgeThreshold::default(),
            };
            let res = density::ridge_scores(&m, &x, r, convention.into(), rule)?;
            let mut t = Table::new(vec!["index".into(), "score".into(), "selected".into()]);
            let mut flags = vec![false; res.scores.len()];
            for &i in &res.selected {
                flags[i] = true;
            }
            for (i, sc) in res.scores.iter().enumerate() {
                t.push(vec![i as f64, *sc, if flags[i] { 1.0 } else { 0.0 }]);
            }
            write_csv(out.as_deref(), &t)?;
            let mut report = Report::new();
            report.num("threshold", res.threshold);
            report.add("selected", res.selected.len());
            report.emit(on_stdout(&out));
            let all = plane_points(rows(&x));
            let picked = res.selected.iter().map(|&i| all[i]).collect();
            write_svg(
                svg.as_ref(),
                &[
                    Layer::Scatter {
                        points: all,
                        color: "gray".into(),
                    },
                    Layer::Scatter {
                        points: picked,
                        color: "red".into(),
                    },
                ],
            )?;
        }
    }
    Ok(())
}

struct HsicInput {
    x: Array2<f64>,
    y: Array2<f64>,
    cfg: HsicConfig,
}

fn hsic_input(a: &HsicData) -> Result<HsicInput, CliError> {
    let table = read_csv(&a.data)?;
    let (x, y) = match a.split {
        Some(k) => {
            let d = table.header.len();
            if k == 0 || k >= d {
                return Err(CliError::Usage(format!("--split must lie in 1..{}, got {k}", d - 1)));
            }
            let all = Array2::from_shape_fn((table.rows.len(), d), |(i, j)| table.rows[i][j]);
            (all.slice(s![.., ..k]).to_owned(), all.slice(s![.., k..]).to_owned())
        }
        None => {
            let s = table.into_samples()?;
            let y = require_target(&s, &a.data)?;
            let n = y.len();
            (s.x, Array2::from_shape_vec((n, 1), y).expect("column shape"))
        }
    };
    let pick = |g: Option<f64>, m: &Array2<f64>| -> Result<KernelSpec, CliError> {
        Ok(match a.kernel {
            HsicKernel::Rbf => KernelSpec::rbf(match g {
                Some(g) => g,
                None => median_heuristic_gamma(m)?,
            }),
            HsicKernel::Linear => {
                if g.is_some() {
                    return Err(CliError::Usage("--gamma-x/--gamma-y need the rbf kernel".into()));
                }
                KernelSpec::Linear
            }
        })
    };
    let cfg = HsicConfig::new(pick(a.gamma_x, &x)?, pick(a.gamma_y, &y)?).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(HsicInput { x, y, cfg })
}

fn hsic_cmd(cmd: HsicCmd) -> Result<(), CliError> {
    match cmd {
        HsicCmd::Value(a) => {
            let h = hsic_input(&a)?;
            println!("{}", sig(hsic::hsic(&h.x, &h.y, &h.cfg)?, DIGITS));
        }
        HsicCmd::Grad { data, out, svg } => {
            let h = hsic_input(&data)?;
            let f = hsic::hsic_grad(&h.x, &h.y, &h.cfg)?;
            let (dx, dy) = (h.x.ncols(), h.y.ncols());
            let mut t = Table::new(
                numbered("gx", dx)
                    .chain(numbered("gy", dy))
                    .chain(["magnitude".to_string()])
                    .collect(),
            );
            for i in 0..h.x.nrows() {
                let mut r: Vec<f64> = f.grad_x.row(i).to_vec();
                r.extend(f.grad_y.row(i).iter());
                r.push(f.magnitude[i]);
                t.push(r);
            }
            write_csv(out.as_deref(), &t)?;
            let mut report = Report::new();
            report.num("hsic", hsic::hsic(&h.x, &h.y, &h.cfg)?);
            report.num("mean_magnitude", hsic::mean_magnitude(&f));
            report.emit(on_stdout(&out));
            let (pts, vecs) = if dx == 1 && dy == 1 {
                let joined = |a: &Array2<f64>, b: &Array2<f64>| {
                    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("same row count")
                };
                (joined(&h.x, &h.y), joined(&f.grad_x, &f.grad_y))
            } else {
                (h.x.clone(), f.grad_x.clone())
            };
            write_svg(svg.as_ref(), &arrow_layers(&pts, &vecs))?;
        }
        HsicCmd::Pvalue { data, perms, seed } => {
            let h = hsic_input(&data)?;
            let mut report = Report::new();
            report.num("hsic", hsic::hsic(&h.x, &h.y, &h.cfg)?);
            report.num("p_value", hsic::permutation_pvalue(&h.x, &h.y, &h.cfg, perms, seed)?);
            report.emit(false);
        }
        HsicCmd::Unfold {
            data,
            direction,
            step,
            iters,
            coords,
            out,
            svg,
        } => {
            let h = hsic_input(&data)?;
            let tr = hsic::unfold(&h.x, &h.y, &h.cfg, direction.into(), step, iters)?;
            let (n, dx, dy) = (h.x.nrows(), h.x.ncols(), h.y.ncols());
            let mut header: Vec<String> = vec!["iter".into(), "hsic".into(), "step".into()];
            if coords {
                for i in 1..=n {
                    header.extend((1..=dx).map(|q| format!("x{i}_{q}")));
                    header.extend((1..=dy).map(|q| format!("y{i}_{q}")));
                }
            }
            let mut t = Table::new(header);
            for st in &tr.states {
                let mut r = vec![st.iter as f64, st.hsic, st.step];
                if coords {
                    for i in 0..n {
                        r.extend(st.x.row(i).iter());
                        r.extend(st.y.row(i).iter());
                    }
                }
                t.push(r);
            }
            write_csv(out.as_deref(), &t)?;
            let mut report = Report::new();
            report.num("initial_hsic", tr.initial().hsic);
            report.num("final_hsic", tr.last().hsic);
            report.add("iterations", tr.states.len() - 1);
            report.add("stalled", tr.stalled);
            report.emit(on_stdout(&out));
            if let Some(p) = svg.as_ref() {
                let plane = |st: &hsic::UnfoldState| {
                    if dx == 1 && dy == 1 {
                        plane_points((0..n).map(|i| vec![st.x[[i, 0]], st.y[[i, 0]]]))
                    } else {
                        plane_points(rows(&st.x))
                    }
                };
                let layers = [
                    Layer::Scatter {
                        points: plane(tr.initial()),
                        color: "gray".into(),
                    },
                    Layer::Scatter {
                        points: plane(tr.last()),
                        color: "red".into(),
                    },
                ];
                write_text(Some(p), &render_svg(&layers))?;
            }
        }
    }
    Ok(())
}
