#include "doctest.h"
#include "matcap/io.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace matcap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

const char* cli_bin() { return std::getenv("MATCAP_CLI_BIN"); }

CliResult run_cli(const std::string& args) {
    CliResult res;
    std::string cmd = std::string(cli_bin()) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 512> buf;
    while (fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "matcap_io_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("double formatting survives a round trip") {
    for (double v : {0.5625, 1.0 / 3.0, -2.0e-17, 100.0 / 91.0, 0.0})
        CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv writer enforces the frozen column count") {
    CsvWriter csv("a,b,c");
    csv.row({"1", "2", "3"});
    CHECK(csv.text() == "a,b,c\n1,2,3\n");
    CHECK_THROWS_AS(csv.row({"1", "2"}), MatcapError);
}

TEST_CASE("run config parses flat text and json with schema validation") {
    RunConfig flat = RunConfig::from_text("lr = 1e-4  # learning rate\nbatch_size=16\nhidden = 15,15,15\n");
    CHECK(flat.get_double("lr", 0) == doctest::Approx(1e-4));
    CHECK(flat.get_int("batch_size", 0) == 16);
    CHECK(flat.get_int_list("hidden", {}) == std::vector<int>{15, 15, 15});
    CHECK_THROWS_AS(flat.require_known({"lr"}), MatcapError);
    flat.require_known({"lr", "batch_size", "hidden"});

    RunConfig js = RunConfig::from_text("{\"lr\": 0.0001, \"hidden\": [8, 8], \"name\": \"x\"}");
    CHECK(js.get_double("lr", 0) == doctest::Approx(1e-4));
    CHECK(js.get_int_list("hidden", {}) == std::vector<int>{8, 8});
    CHECK(js.get_string("name", "") == "x");
    CHECK_THROWS_AS(RunConfig::from_text("no equals sign here"), MatcapError);
}

TEST_CASE("base64 round trip") {
    SeededRng rng(3);
    for (int len : {0, 1, 2, 3, 17, 80}) {
        std::vector<unsigned char> data(len);
        for (auto& b : data) b = static_cast<unsigned char>(rng.next_u64() & 0xff);
        std::string text = encode_base64(data.data(), data.size());
        CHECK(decode_base64(text) == data);
    }
}

TEST_CASE("checkpoints round trip with bit-identical forward outputs") {
    SeededRng rng(4);
    MatNtmModel model(tiny_config(true), rng);
    TrainConfig cfg;
    cfg.content_n = 2;
    cfg.model_override = model.config();
    OptimizerState opt;
    opt.acc.emplace_back(3, 8);

    fs::path path = temp_dir() / "ckpt.json";
    save_checkpoint(path.string(), model, cfg, opt, 99, 1234, 7);
    LoadedCheckpoint ck = load_checkpoint(path.string());
    CHECK(ck.iteration == 7);
    CHECK(ck.rng_seed == 99);
    CHECK(ck.rng_position == 1234);
    MatNtmModel restored = ck.instantiate();

    SeededRng data_rng(5);
    std::vector<Mat> inputs{data_rng.normal_mat(3, 3), data_rng.normal_mat(3, 3)};
    Tape t1, t2;
    auto r1 = model.forward_sequence(t1, inputs, 2, nullptr, false, false);
    auto r2 = restored.forward_sequence(t2, inputs, 2, nullptr, false, false);
    for (size_t i = 0; i < r1.probs.size(); ++i)
        CHECK(max_abs(t1.value(r1.probs[i]) - t2.value(r2.probs[i])) == 0.0);

    // save -> load -> save is byte-identical
    fs::path path2 = temp_dir() / "ckpt2.json";
    save_checkpoint(path2.string(), restored, ck.train_config, OptimizerState{}, 99, 1234, 7);
    LoadedCheckpoint ck2 = load_checkpoint(path2.string());
    fs::path path3 = temp_dir() / "ckpt3.json";
    save_checkpoint(path3.string(), ck2.instantiate(), ck2.train_config, OptimizerState{}, 99, 1234, 7);
    CHECK(slurp(path2) == slurp(path3));
}

TEST_CASE("svg plots render deterministically") {
    SvgPlot plot("title", "x", "y", false);
    SvgSeries s;
    s.x = {0, 1, 2, 3};
    s.y = {1.0, 0.5, 0.25, 0.125};
    s.label = "series";
    plot.add(s);
    std::string g1 = plot.render_group(0, 0, 460, 320);
    std::string g2 = plot.render_group(0, 0, 460, 320);
    CHECK(g1 == g2);
    CHECK(g1.find("polyline") != std::string::npos);
    fs::path path = temp_dir() / "plot.svg";
    write_svg_panels({plot, plot}, path.string());
    std::string doc = slurp(path);
    CHECK(doc.find("<svg") != std::string::npos);
    CHECK(doc.find("</svg>") != std::string::npos);
}

TEST_CASE("cli determinism and exit codes") {
    if (!cli_bin()) {
        MESSAGE("MATCAP_CLI_BIN not set; skipping CLI coverage");
        return;
    }
    fs::path dir = temp_dir();

    // scalar preset anchor row: J(0) = 0.5625
    auto fmc1 = run_cli("fmc --n 1 --trials 1 --seed 1 --kmax 20 --preset scalar --out " +
                        (dir / "fmc_a").string());
    CHECK(fmc1.exit_code == 0);
    std::string csv = slurp(dir / "fmc_a.csv");
    CHECK(csv.rfind("trial,i,J_i,cumulative\n0,0,", 0) == 0);
    {
        std::istringstream rows(csv);
        std::string header, first;
        std::getline(rows, header);
        std::getline(rows, first);
        size_t second_comma = first.find(',', first.find(',') + 1);
        double j0 = std::stod(first.substr(second_comma + 1));
        CHECK(j0 == doctest::Approx(0.5625).epsilon(1e-12));
    }

    auto fmc2 = run_cli("fmc --n 1 --trials 1 --seed 1 --kmax 20 --preset scalar --out " +
                        (dir / "fmc_b").string());
    CHECK(fmc2.exit_code == 0);
    CHECK(slurp(dir / "fmc_a.csv") == slurp(dir / "fmc_b.csv"));
    CHECK(slurp(dir / "fmc_a.svg") == slurp(dir / "fmc_b.svg"));

    auto fmc_sampled_1 = run_cli("fmc --n 3 --trials 2 --seed 9 --kmax 16 --out " + (dir / "fmc_c").string());
    auto fmc_sampled_2 = run_cli("fmc --n 3 --trials 2 --seed 9 --kmax 16 --out " + (dir / "fmc_d").string());
    CHECK(fmc_sampled_1.exit_code == 0);
    CHECK(fmc_sampled_2.exit_code == 0);
    CHECK(slurp(dir / "fmc_c.csv") == slurp(dir / "fmc_d.csv"));

    // header-only CSV for zero trials
    auto empty = run_cli("fmc --n 2 --trials 0 --seed 1 --out " + (dir / "fmc_empty").string());
    CHECK(empty.exit_code == 0);
    CHECK(slurp(dir / "fmc_empty.csv") == "trial,i,J_i,cumulative\n");

    auto sweep1 = run_cli("capacity-sweep --n-list 2,3 --trials 3 --normal --seed 2 --out " +
                          (dir / "sweep_a").string());
    auto sweep2 = run_cli("capacity-sweep --n-list 2,3 --trials 3 --normal --seed 2 --out " +
                          (dir / "sweep_b").string());
    CHECK(sweep1.exit_code == 0);
    std::string sweep_csv = slurp(dir / "sweep_a.csv");
    CHECK(sweep_csv.rfind("N,trial,J_tot,J_tot_rel,bound,satisfied\n", 0) == 0);
    CHECK(sweep_csv == slurp(dir / "sweep_b.csv"));

    auto mem1 = run_cli("mem-fmc --n 2 --trials 1 --m-max 2 --kmax 8 --seed 3 --out " +
                        (dir / "mem_a").string());
    auto mem2 = run_cli("mem-fmc --n 2 --trials 1 --m-max 2 --kmax 8 --seed 3 --out " +
                        (dir / "mem_b").string());
    CHECK(mem1.exit_code == 0);
    CHECK(slurp(dir / "mem_a.csv") == slurp(dir / "mem_b.csv"));
    CHECK(slurp(dir / "mem_a.csv").rfind("trial,k,J_prime_k,cumulative,J_tot_base,ratio\n", 0) == 0);

    // config errors exit 2
    auto bad = run_cli("train --task copy --config /nonexistent/file.cfg --out " + (dir / "run").string());
    CHECK(bad.exit_code == 2);
    std::ofstream bad_cfg(dir / "bad.cfg");
    bad_cfg << "unknown_key = 1\n";
    bad_cfg.close();
    auto bad2 = run_cli("train --task copy --config " + (dir / "bad.cfg").string() + " --out " +
                        (dir / "run").string());
    CHECK(bad2.exit_code == 2);
    auto bad3 = run_cli("fmc --definitely-not-a-flag");
    CHECK(bad3.exit_code == 2);
}

TEST_CASE("cli train writes the full run directory and eval consumes checkpoints") {
    if (!cli_bin()) return;
    fs::path dir = temp_dir() / "train_run";
    fs::remove_all(dir);
    fs::path cfg_path = temp_dir() / "smoke.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "max_iterations = 4\nbatch_size = 2\ncontent_n = 2\nl_min = 1\nl_max = 3\n"
            << "hidden = 8\nslots = 8\nmem_n = 3\neval_every = 2\neval_samples = 4\neval_l_max = 3\n"
            << "checkpoint_every = 4\n";
    }
    auto train = run_cli("train --task copy --model matntm --seed 5 --config " + cfg_path.string() +
                         " --out " + dir.string());
    INFO(train.output);
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(dir / "learning_curve.csv"));
    CHECK(fs::exists(dir / "eval_curve.csv"));
    CHECK(fs::exists(dir / "final_report.json"));
    CHECK(fs::exists(dir / "params_table.csv"));
    CHECK(fs::exists(dir / "diagnostics.csv"));
    CHECK(fs::exists(dir / "checkpoint_final.json"));
    CHECK(slurp(dir / "learning_curve.csv").rfind("iteration,sequences,bce,bit_error\n", 0) == 0);
    CHECK(slurp(dir / "diagnostics.csv").rfind("step,phase,head,slot,weight\n", 0) == 0);

    // deterministic rerun
    fs::path dir2 = temp_dir() / "train_run2";
    fs::remove_all(dir2);
    auto train2 = run_cli("train --task copy --model matntm --seed 5 --config " + cfg_path.string() +
                          " --out " + dir2.string());
    CHECK(train2.exit_code == 0);
    CHECK(slurp(dir / "learning_curve.csv") == slurp(dir2 / "learning_curve.csv"));
    CHECK(slurp(dir / "checkpoint_final.json") == slurp(dir2 / "checkpoint_final.json"));

    auto ev = run_cli("eval --checkpoint " + (dir / "checkpoint_final.json").string() +
                      " --sweep l=1..3 --samples 3 --seed 2 --out " + (dir / "ev").string());
    INFO(ev.output);
    CHECK(ev.exit_code == 0);
    std::string ev_csv = slurp(dir / "ev.csv");
    CHECK(ev_csv.rfind("sweep_value,mean_bce,bit_error\n", 0) == 0);
    auto ev2 = run_cli("eval --checkpoint " + (dir / "checkpoint_final.json").string() +
                       " --sweep l=1..3 --samples 3 --seed 2 --out " + (dir / "ev2").string());
    CHECK(ev2.exit_code == 0);
    CHECK(ev_csv == slurp(dir / "ev2.csv"));
}

TEST_CASE("cli gradcheck passes on the tiny model") {
    if (!cli_bin()) return;
    auto res = run_cli("gradcheck");
    INFO(res.output);
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("[PASS]") != std::string::npos);
}
