#include <atomic>
#include <filesystem>
#include <thread>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "matcap/fmc.hpp"
#include "matcap/io.hpp"
#include "matcap/memory_fmc.hpp"
#include "matcap/training.hpp"

namespace fs = std::filesystem;
using namespace matcap;

namespace {

constexpr int kExitConfig = 2;

// Trial-parallel map with results buffered and consumed in trial order.
template <typename Result, typename Fn>
std::vector<Result> run_trials(int trials, Fn&& fn) {
    std::vector<Result> results(trials);
    const int workers = std::min(trials > 0 ? trials : 1, resolve_threads(0));
    if (workers <= 1) {
        for (int t = 0; t < trials; ++t) results[t] = fn(t);
        return results;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) results[t] = fn(t);
        });
    for (auto& th : pool) th.join();
    return results;
}
constexpr int kExitNonConvergent = 3;
constexpr int kExitCheckFailure = 4;

LinearMatrixDynamics sample_dynamics(int n, double radius, SeededRng& rng, bool normal) {
    LinearMatrixDynamics dyn;
    dyn.u = normal ? random_normal_convergent(n, radius, rng) : random_general_convergent(n, radius, rng);
    dyn.v = normal ? random_normal_convergent(n, radius, rng) : random_general_convergent(n, radius, rng);
    dyn.w = rng.normal_mat(n, n);
    dyn.w *= 1.0 / frobenius_norm(dyn.w);  // Tr(W^T W) = 1 so J_tot_rel = J_tot
    return dyn;
}

LinearMatrixDynamics scalar_preset() {
    LinearMatrixDynamics dyn;
    dyn.u = Mat(1, 1, {0.5});
    dyn.v = Mat(1, 1, {0.5});
    dyn.w = Mat(1, 1, {1.0});
    return dyn;
}

int run_fmc(int n, int trials, double radius, uint64_t seed, int k_max, const std::string& out,
            const std::string& preset) {
    CsvWriter csv("trial,i,J_i,cumulative");
    SvgPlot curve_plot("Fisher memory curves", "i", "J(i)", true);
    SvgPlot cumulative_plot("Cumulative Fisher information", "i", "sum J", false);
    const char* mat_colors[] = {"#1f6fb2", "#2a9d8f", "#7b2d8b", "#b25f1f"};
    const char* vec_colors[] = {"#c44536", "#d4a017", "#4a7c59", "#5a5a8f"};

    struct TrialResult {
        FmcSeries matrix, vector;
    };
    auto results = run_trials<TrialResult>(trials, [&](int trial) {
        SeededRng rng = SeededRng(seed).spawn(trial);
        LinearMatrixDynamics dyn =
            preset == "scalar" ? scalar_preset() : sample_dynamics(n, radius, rng, true);
        TrialResult res;
        res.matrix = fmc(dyn, k_max);
        // vector baseline with the same neuron count (N^2) for the companion panel
        VectorDynamics vd;
        int n_vec = dyn.n() * dyn.n();
        vd.w_rec = random_normal_convergent(n_vec, preset == "scalar" ? 0.5 : radius, rng);
        Mat v = rng.normal_mat(n_vec, 1);
        v *= 1.0 / frobenius_norm(v);
        vd.v.assign(v.data(), v.data() + n_vec);
        res.vector = vector_fmc(vd, k_max);
        return res;
    });

    for (int trial = 0; trial < trials; ++trial) {
        const FmcSeries& series = results[trial].matrix;
        SvgSeries mat_curve, mat_cum;
        for (int i = 0; i <= k_max; ++i) {
            csv.row({std::to_string(trial), std::to_string(i), format_double(series.values[i]),
                     format_double(series.cumulative[i])});
            mat_curve.x.push_back(i);
            mat_curve.y.push_back(series.values[i]);
            mat_cum.x.push_back(i);
            mat_cum.y.push_back(series.cumulative[i]);
        }
        mat_curve.color = mat_cum.color = mat_colors[trial % 4];
        if (trial == 0) mat_curve.label = mat_cum.label = "matrix";
        curve_plot.add(mat_curve);
        cumulative_plot.add(mat_cum);

        const FmcSeries& vs = results[trial].vector;
        SvgSeries vec_curve, vec_cum;
        for (int i = 0; i <= k_max; ++i) {
            vec_curve.x.push_back(i);
            vec_curve.y.push_back(vs.values[i]);
            vec_cum.x.push_back(i);
            vec_cum.y.push_back(vs.cumulative[i]);
        }
        vec_curve.color = vec_cum.color = vec_colors[trial % 4];
        vec_curve.dashed = vec_cum.dashed = true;
        if (trial == 0) vec_curve.label = vec_cum.label = "vector";
        curve_plot.add(vec_curve);
        cumulative_plot.add(vec_cum);
    }
    csv.write_file(out + ".csv");
    write_svg_panels({curve_plot, cumulative_plot}, out + ".svg");
    return 0;
}

int run_capacity_sweep(const std::vector<int>& n_list, int trials, bool normal, double radius,
                       uint64_t seed, const std::string& out) {
    CsvWriter csv("N,trial,J_tot,J_tot_rel,bound,satisfied");
    for (int n : n_list) {
        auto reports = run_trials<CapacityBoundsReport>(trials, [&](int trial) {
            SeededRng rng = SeededRng(seed).spawn(static_cast<uint64_t>(n) * 100000 + trial);
            return capacity_bounds_report(sample_dynamics(n, radius, rng, normal));
        });
        for (int trial = 0; trial < trials; ++trial) {
            const auto& rep = reports[trial];
            double bound = normal ? 1.0 : static_cast<double>(n) * n;
            bool satisfied = normal ? rep.normal_bound_satisfied : rep.general_bound_satisfied;
            csv.row({std::to_string(n), std::to_string(trial), format_double(rep.j_tot),
                     format_double(rep.j_tot_rel), format_double(bound), satisfied ? "1" : "0"});
        }
    }
    csv.write_file(out + ".csv");
    return 0;
}

int run_mem_fmc(int n, int trials, int m_max, int k_max, double radius, uint64_t seed,
                const std::string& out, const std::string& preset) {
    CsvWriter csv("trial,k,J_prime_k,cumulative,J_tot_base,ratio");
    SvgPlot curve_plot("Memory-augmented FMC", "k", "J'(k)", true);
    SvgPlot cumulative_plot("Cumulative J' against base capacity", "k", "sum J'", false);
    const char* colors[] = {"#1f6fb2", "#2a9d8f", "#7b2d8b", "#b25f1f"};
    struct TrialResult {
        FmcSeries series;
        double j_tot_base = 0.0;
    };
    auto results = run_trials<TrialResult>(trials, [&](int trial) {
        SeededRng rng = SeededRng(seed).spawn(trial + 31);
        MemoryAugmentedDynamics dyn;
        dyn.base = preset == "scalar" ? scalar_preset() : sample_dynamics(n, radius, rng, true);
        dyn.m_max = m_max;
        dyn.k_max = k_max;
        return TrialResult{mem_fmc(dyn), capacity(dyn.base, 1e-12)};
    });
    for (int trial = 0; trial < trials; ++trial) {
        const FmcSeries& series = results[trial].series;
        const double j_tot_base = results[trial].j_tot_base;
        SvgSeries curve, cumulative;
        for (int k = 0; k <= k_max; ++k) {
            csv.row({std::to_string(trial), std::to_string(k), format_double(series.values[k]),
                     format_double(series.cumulative[k]), format_double(j_tot_base),
                     format_double(series.cumulative[k] / j_tot_base)});
            curve.x.push_back(k);
            curve.y.push_back(series.values[k]);
            cumulative.x.push_back(k);
            cumulative.y.push_back(series.cumulative[k]);
        }
        curve.color = cumulative.color = colors[trial % 4];
        if (trial == 0) curve.label = cumulative.label = "J'(k)";
        curve_plot.add(curve);
        cumulative_plot.add(cumulative);
    }
    csv.write_file(out + ".csv");
    write_svg_panels({curve_plot, cumulative_plot}, out + ".svg");
    return 0;
}

TrainConfig resolve_train_config(const std::string& task, const std::string& model_kind,
                                 const std::string& config_path, uint64_t seed) {
    TrainConfig cfg;
    cfg.task = parse_task(task);
    cfg.external_memory = model_kind == "matntm";
    cfg.lr = cfg.task == TaskKind::Copy ? 1e-4 : 8e-5;
    cfg.seed = seed;
    if (!config_path.empty()) {
        RunConfig rc = RunConfig::from_file(config_path);
        rc.require_known({"batch_size", "lr", "max_iterations", "clip_norm", "eval_every",
                          "eval_samples", "eval_l_max", "content_n", "l_min", "l_max", "item_len",
                          "k_min", "k_max", "checkpoint_every", "threads", "hidden", "slots", "mem_n",
                          "early_stop_bit_error"});
        cfg.batch_size = rc.get_int("batch_size", cfg.batch_size);
        cfg.lr = rc.get_double("lr", cfg.lr);
        cfg.max_iterations = rc.get_int("max_iterations", cfg.max_iterations);
        cfg.clip_norm = rc.get_double("clip_norm", cfg.clip_norm);
        cfg.eval_every = rc.get_int("eval_every", cfg.eval_every);
        cfg.eval_samples = rc.get_int("eval_samples", cfg.eval_samples);
        cfg.eval_l_max = rc.get_int("eval_l_max", cfg.eval_l_max);
        cfg.content_n = rc.get_int("content_n", cfg.content_n);
        cfg.l_min = rc.get_int("l_min", cfg.l_min);
        cfg.l_max = rc.get_int("l_max", cfg.l_max);
        cfg.item_len = rc.get_int("item_len", cfg.item_len);
        cfg.k_min = rc.get_int("k_min", cfg.k_min);
        cfg.k_max = rc.get_int("k_max", cfg.k_max);
        cfg.checkpoint_every = rc.get_int("checkpoint_every", cfg.checkpoint_every);
        cfg.threads = rc.get_int("threads", cfg.threads);
        if (rc.has("early_stop_bit_error")) cfg.early_stop_bit_error = rc.get_double("early_stop_bit_error", 0.0);
        MatNtmConfig mc = cfg.model_config();
        mc.hidden = rc.get_int_list("hidden", mc.hidden);
        mc.slots = rc.get_int("slots", mc.slots);
        mc.mem_n = rc.get_int("mem_n", mc.mem_n);
        cfg.model_override = mc;
    }
    return cfg;
}

int run_train(const std::string& task, const std::string& model_kind, const std::string& config_path,
              uint64_t seed, const std::string& out_dir) {
    TrainConfig cfg = resolve_train_config(task, model_kind, config_path, seed);
    fs::create_directories(out_dir);

    MatNtmConfig mc = cfg.model_config();
    SeededRng init_rng(cfg.seed * 104729 + 3);
    MatNtmModel model(mc, init_rng);

    {
        std::ofstream table(out_dir + "/params_table.csv", std::ios::binary);
        table << model.parameter_table();
    }

    CheckpointHook hook = [&](const MatNtmModel& m, const OptimizerState& opt, const SeededRng& rng,
                              int iteration) {
        save_checkpoint(out_dir + "/checkpoint_" + std::to_string(iteration) + ".json", m, cfg, opt,
                        rng.seed(), rng.position(), iteration);
        save_checkpoint(out_dir + "/checkpoint_final.json", m, cfg, opt, rng.seed(), rng.position(),
                        iteration);
    };
    // stream both curves so long runs can be monitored while training
    std::ofstream curve_stream(out_dir + "/learning_curve.csv", std::ios::binary);
    curve_stream << "iteration,sequences,bce,bit_error\n";
    ProgressHook progress = [&](const IterationRecord& rec) {
        curve_stream << rec.iteration << ',' << rec.sequences << ',' << format_double(rec.bce) << ','
                     << format_double(rec.bit_error) << '\n';
        if (rec.iteration % 50 == 0) curve_stream.flush();
    };
    std::ofstream eval_stream(out_dir + "/eval_curve.csv", std::ios::binary);
    eval_stream << "iteration,bce,bit_error\n";
    EvalHook eval_hook = [&](const EvalRecord& rec) {
        eval_stream << rec.iteration << ',' << format_double(rec.bce) << ','
                    << format_double(rec.bit_error) << '\n';
        eval_stream.flush();
    };
    TrainResult result = train(cfg, model, hook, progress, eval_hook);
    curve_stream.flush();
    eval_stream.flush();

    SvgPlot eval_plot("Held-out error", "iteration", "per-bit error", false);
    SvgSeries eval_series;
    for (const auto& rec : result.evals) {
        eval_series.x.push_back(rec.iteration);
        eval_series.y.push_back(rec.bit_error);
    }
    eval_plot.add(eval_series);

    SvgPlot loss_plot("Training BCE", "iteration", "bce", false);
    SvgSeries loss_series;
    for (const auto& rec : result.curve) {
        loss_series.x.push_back(rec.iteration);
        loss_series.y.push_back(rec.bce);
    }
    loss_plot.add(loss_series);
    write_svg_panels({loss_plot, eval_plot}, out_dir + "/learning_curve.svg");

    // head-weight diagnostics on a fixed probe sample, for the attention heatmaps
    if (mc.external_memory) {
        SeededRng probe_rng(1234);
        TrainConfig probe_cfg = cfg;
        probe_cfg.l_min = probe_cfg.l_max = std::min(5, cfg.l_max);
        TaskSample probe = probe_cfg.sample(probe_rng);
        Tape tape;
        auto roll = model.forward_sequence(tape, probe.inputs, static_cast<int>(probe.targets.size()),
                                           nullptr, false, true);
        CsvWriter diag("step,phase,head,slot,weight");
        const size_t input_steps = probe.inputs.size();
        for (size_t step = 0; step < roll.read_weights.size(); ++step) {
            std::string phase = step < input_steps ? "in" : "out";
            for (int slot = 0; slot < mc.slots; ++slot) {
                diag.row({std::to_string(step), phase, "read", std::to_string(slot),
                          format_double(roll.read_weights[step](slot, 0))});
                diag.row({std::to_string(step), phase, "write", std::to_string(slot),
                          format_double(roll.write_weights[step](slot, 0))});
            }
        }
        diag.write_file(out_dir + "/diagnostics.csv");
    }

    nlohmann::json report;
    report["task"] = task;
    report["model"] = model_kind;
    report["seed"] = cfg.seed;
    report["param_count"] = result.param_count;
    report["iterations_run"] = result.iterations_run;
    report["sequences_seen"] = static_cast<long long>(result.iterations_run) * cfg.batch_size;
    report["best_eval_bce"] = result.best_eval_bce;
    report["best_eval_bit_error"] = result.best_eval_bit_error;
    report["final_eval_bce"] = result.evals.empty() ? -1.0 : result.evals.back().bce;
    report["final_eval_bit_error"] = result.evals.empty() ? -1.0 : result.evals.back().bit_error;
    report["diverged"] = result.diverged;
    std::ofstream rep(out_dir + "/final_report.json", std::ios::binary);
    rep << report.dump(1) << "\n";
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& sweep, int samples, uint64_t seed,
             const std::string& out) {
    LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
    MatNtmModel model = ck.instantiate();

    // sweep grammar: "l=1..40" or "n=1..6" (value range inclusive)
    size_t eq = sweep.find('=');
    size_t dots = sweep.find("..");
    if (eq == std::string::npos || dots == std::string::npos || dots < eq)
        throw_error(ErrorCode::ConfigError, "eval: sweep must look like l=1..40");
    int lo = std::stoi(sweep.substr(eq + 1, dots - eq - 1));
    int hi = std::stoi(sweep.substr(dots + 2));
    if (lo < 1 || hi < lo) throw_error(ErrorCode::ConfigError, "eval: bad sweep range");
    std::vector<int> values;
    for (int v = lo; v <= hi; ++v) values.push_back(v);

    auto rows = evaluate_generalization(model, ck.train_config.task, values, seed, samples);
    CsvWriter csv("sweep_value,mean_bce,bit_error");
    SvgPlot plot("Cost against sweep value", sweep.substr(0, eq), "mean bce", false);
    SvgSeries series;
    for (const auto& [value, rec] : rows) {
        csv.row({std::to_string(value), format_double(rec.bce), format_double(rec.bit_error)});
        series.x.push_back(value);
        series.y.push_back(rec.bce);
    }
    plot.add(series);
    csv.write_file(out + ".csv");
    write_svg_panels({plot}, out + ".svg");
    return 0;
}

int run_gradcheck(const std::string& config_path) {
    double eps = 1e-5;
    int coords = 200;
    if (!config_path.empty()) {
        RunConfig rc = RunConfig::from_file(config_path);
        rc.require_known({"eps", "coords"});
        eps = rc.get_double("eps", eps);
        coords = rc.get_int("coords", coords);
    }
    if (eps < 1e-7 || eps > 1e-4) throw_error(ErrorCode::ConfigError, "gradcheck: eps must be in [1e-7, 1e-4]");

    SeededRng model_rng(42);
    MatNtmModel model(tiny_config(true), model_rng);
    SeededRng task_rng(43);

    auto run_unroll = [&](int content_steps, const char* name, double threshold) {
        TaskSample sample = gen_copy_task(model.config().content_n, content_steps, content_steps, task_rng);
        std::vector<Mat> values;
        for (const auto& p : model.params()) values.push_back(p.value);
        auto build = [&](Tape& tape, const std::vector<Mat>& params) {
            std::vector<int> pn(params.size());
            for (size_t i = 0; i < params.size(); ++i) pn[i] = tape.param(params[i], static_cast<int>(i));
            MatNtmModel::StepState state = model.initial_state(tape);
            int loss = -1;
            for (const Mat& token : sample.inputs) model.step(tape, state, tape.constant(token), pn);
            for (size_t t = 0; t < sample.targets.size(); ++t) {
                int logits = model.step(tape, state, tape.constant(Mat::zeros(model.config().token_n, model.config().token_n)), pn);
                int l = tape.bce_loss(tape.sigmoid_elem(logits), tape.constant(sample.targets[t]));
                loss = loss < 0 ? l : tape.add(loss, l);
            }
            return tape.scale(loss, 1.0 / sample.targets.size());
        };
        SeededRng coord_rng(7);
        double err = grad_check(build, values, eps, coords, coord_rng);
        bool ok = err <= threshold;
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": max rel err " << format_double(err)
                  << " (threshold " << format_double(threshold) << ")\n";
        return ok;
    };

    bool ok = true;
    ok &= run_unroll(1, "single step", 1e-5);
    ok &= run_unroll(4, "4-step unroll", 1e-4);
    return ok ? 0 : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"matcap: Fisher memory capacity of matrix recurrent networks and a matrix NTM"};
    app.require_subcommand(1);

    auto* fmc_cmd = app.add_subcommand("fmc", "Fisher memory curves for sampled normal systems");
    int fmc_n = 4, fmc_trials = 1, fmc_kmax = 64;
    double fmc_radius = 0.9;
    uint64_t fmc_seed = 1;
    std::string fmc_out = "fmc", fmc_preset;
    fmc_cmd->add_option("--n", fmc_n, "state matrix size N");
    fmc_cmd->add_option("--trials", fmc_trials, "number of sampled systems");
    fmc_cmd->add_option("--radius", fmc_radius, "spectral radius bound");
    fmc_cmd->add_option("--seed", fmc_seed, "rng seed");
    fmc_cmd->add_option("--kmax", fmc_kmax, "curve length");
    fmc_cmd->add_option("--out", fmc_out, "output path prefix");
    fmc_cmd->add_option("--preset", fmc_preset, "fixed system preset (scalar: u=v=0.5, w=1)");

    auto* sweep_cmd = app.add_subcommand("capacity-sweep", "J_tot against the normal (1) and general (N^2) capacity bounds");
    std::string sweep_n_list = "2,4,8";
    int sweep_trials = 10;
    bool sweep_normal = false, sweep_general = false;
    double sweep_radius = 0.9;
    uint64_t sweep_seed = 1;
    std::string sweep_out = "capacity_sweep";
    sweep_cmd->add_option("--n-list", sweep_n_list, "comma separated N values");
    sweep_cmd->add_option("--trials", sweep_trials, "trials per N");
    sweep_cmd->add_flag("--normal", sweep_normal, "normal connectivity (bound 1)");
    sweep_cmd->add_flag("--general", sweep_general, "general connectivity (bound N^2)");
    sweep_cmd->add_option("--radius", sweep_radius, "spectral radius bound");
    sweep_cmd->add_option("--seed", sweep_seed, "rng seed");
    sweep_cmd->add_option("--out", sweep_out, "output path prefix");

    auto* mem_cmd = app.add_subcommand("mem-fmc", "FMC of the queue-memory augmented dynamics (p=1)");
    int mem_n = 4, mem_trials = 1, mem_mmax = 3, mem_kmax = 32;
    double mem_radius = 0.9;
    uint64_t mem_seed = 1;
    std::string mem_out = "mem_fmc", mem_preset;
    mem_cmd->add_option("--n", mem_n, "state matrix size N");
    mem_cmd->add_option("--trials", mem_trials, "number of sampled systems");
    mem_cmd->add_option("--m-max", mem_mmax, "memory-hop series truncation depth");
    mem_cmd->add_option("--kmax", mem_kmax, "curve length");
    mem_cmd->add_option("--radius", mem_radius, "spectral radius bound");
    mem_cmd->add_option("--seed", mem_seed, "rng seed");
    mem_cmd->add_option("--out", mem_out, "output path prefix");
    mem_cmd->add_option("--preset", mem_preset, "fixed system preset (scalar)");

    auto* train_cmd = app.add_subcommand("train", "train MatNTM or the Matrix RNN baseline");
    std::string train_task = "copy", train_model = "matntm", train_config, train_out = "run";
    uint64_t train_seed = 11;
    train_cmd->add_option("--task", train_task, "copy | recall")->check(CLI::IsMember({"copy", "recall"}));
    train_cmd->add_option("--model", train_model, "matntm | matrnn")->check(CLI::IsMember({"matntm", "matrnn"}));
    train_cmd->add_option("--config", train_config, "key=value or JSON config file");
    train_cmd->add_option("--seed", train_seed, "rng seed");
    train_cmd->add_option("--out", train_out, "run directory");

    auto* eval_cmd = app.add_subcommand("eval", "generalization sweep from a checkpoint");
    std::string eval_ckpt, eval_sweep = "l=1..40", eval_out = "eval";
    int eval_samples = 100;
    uint64_t eval_seed = 1;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")->required();
    eval_cmd->add_option("--sweep", eval_sweep, "sweep spec, e.g. l=1..40");
    eval_cmd->add_option("--samples", eval_samples, "samples per sweep value");
    eval_cmd->add_option("--seed", eval_seed, "rng seed");
    eval_cmd->add_option("--out", eval_out, "output path prefix");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the tape gradients");
    std::string grad_config;
    grad_cmd->add_option("--config", grad_config, "key=value config file (eps, coords)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (fmc_cmd->parsed())
            return run_fmc(fmc_n, fmc_trials, fmc_radius, fmc_seed, fmc_kmax, fmc_out, fmc_preset);
        if (sweep_cmd->parsed()) {
            if (sweep_normal && sweep_general)
                throw_error(ErrorCode::ConfigError, "capacity-sweep: pick one of --normal/--general");
            bool normal = !sweep_general;
            RunConfig list = RunConfig::from_text("n=" + sweep_n_list);
            return run_capacity_sweep(list.get_int_list("n", {}), sweep_trials, normal, sweep_radius,
                                      sweep_seed, sweep_out);
        }
        if (mem_cmd->parsed())
            return run_mem_fmc(mem_n, mem_trials, mem_mmax, mem_kmax, mem_radius, mem_seed, mem_out,
                               mem_preset);
        if (train_cmd->parsed())
            return run_train(train_task, train_model, train_config, train_seed, train_out);
        if (eval_cmd->parsed()) return run_eval(eval_ckpt, eval_sweep, eval_samples, eval_seed, eval_out);
        if (grad_cmd->parsed()) return run_gradcheck(grad_config);
    } catch (const MatcapError& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
            case ErrorCode::ConfigError:
                return kExitConfig;
            case ErrorCode::NonConvergent:
                return kExitNonConvergent;
            default:
                return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
