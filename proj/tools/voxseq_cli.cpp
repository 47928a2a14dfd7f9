// voxseq: ordering generation, locality comparison, scaling benchmarks, toy
// training and evaluation for voxel-sequence models.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxseq/block.hpp"
#include "voxseq/io.hpp"
#include "voxseq/locality.hpp"
#include "voxseq/ordering.hpp"
#include "voxseq/threads.hpp"
#include "voxseq/training.hpp"

using nlohmann::json;
using namespace voxseq;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

GridDims parse_dims(const std::string& text) {
    int64_t w = 0, h = 0, d = 0;
    char sep1 = 0, sep2 = 0;
    std::istringstream in(text);
    if (!(in >> w >> sep1 >> h >> sep2 >> d) || sep1 != 'x' || sep2 != 'x' || !in.eof())
        throw CLI::ValidationError("--dims", "expected WxHxD, got '" + text + "'");
    GridDims dims{w, h, d, 0};
    dims.validate();
    return dims;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

int cmd_order(const std::string& scheme_name_arg, const std::string& dims_arg, bool z_snake,
              const std::string& out_path) {
    OrderingScheme scheme;
    try {
        scheme.kind = parse_scheme(scheme_name_arg);
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }
    scheme.z_snake = z_snake;
    const GridDims dims = parse_dims(dims_arg);
    const Ordering ordering = build_ordering(scheme, dims);
    write_ordering(out_path, ordering);
    std::cout << "wrote " << out_path << " (" << ordering.seq_to_linear.size() << " entries)\n";
    return 0;
}

int cmd_locality(const std::string& dims_arg, const std::string& schemes_arg,
                 const std::string& csv_path) {
    const GridDims dims = parse_dims(dims_arg);
    std::vector<OrderingScheme> schemes;
    for (const auto& name : split_list(schemes_arg)) {
        OrderingScheme s;
        try {
            s.kind = parse_scheme(name);
        } catch (const std::invalid_argument& e) {
            std::cerr << e.what() << "\n";
            return kExitUsage;
        }
        schemes.push_back(s);
    }
    if (schemes.empty()) {
        std::cerr << "empty scheme list\n";
        return kExitUsage;
    }
    const auto reports = compare_schemes(dims, schemes);
    const std::string csv = locality_csv(reports);
    std::cout << csv;
    if (!csv_path.empty()) {
        std::ofstream f(csv_path, std::ios::binary);
        f << csv;
        if (!f) throw std::runtime_error("cannot write " + csv_path);
    }
    return 0;
}

struct BenchRow {
    int64_t n;
    double mean_ns;
    double stddev_ns;
};

template <class T>
BenchRow bench_length(int64_t n, int64_t channels, int64_t state_dim, int64_t repeats) {
    Rng rng(0xbe7c4 + static_cast<uint64_t>(n));
    MambaBlockParams params64 = init_mamba_block(channels, state_dim, rng);
    const auto params = params64.template cast<T>();
    SeqTensorT<T> x(1, n, channels);
    for (auto& v : x.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));

    (void)mamba_block_forward(params, x);  // warmup
    std::vector<double> times;
    for (int64_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto y = mamba_block_forward(params, x);
        const auto t1 = std::chrono::steady_clock::now();
        if (!std::isfinite(static_cast<double>(y.data[0]))) throw std::runtime_error("bench: non-finite output");
        times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    var = times.size() > 1 ? var / static_cast<double>(times.size() - 1) : 0.0;
    return {n, mean, std::sqrt(var)};
}

double fit_loglog_slope(const std::vector<BenchRow>& rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        const double x = std::log(static_cast<double>(r.n));
        const double y = std::log(r.mean_ns);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

int cmd_bench(const std::string& lengths_arg, int64_t channels, int64_t repeats, int64_t state_dim,
              const std::string& dtype) {
    std::vector<int64_t> lengths;
    for (const auto& tok : split_list(lengths_arg)) {
        try {
            size_t used = 0;
            const int64_t v = std::stoll(tok, &used);
            if (used != tok.size() || v < 2) throw std::invalid_argument(tok);
            lengths.push_back(v);
        } catch (const std::exception&) {
            std::cerr << "non-numeric length: '" << tok << "'\n";
            return kExitUsage;
        }
    }
    if (lengths.size() < 3) {
        std::cerr << "need at least 3 lengths to fit a slope\n";
        return kExitUsage;
    }
    if (dtype != "f32" && dtype != "f64") {
        std::cerr << "unknown dtype: " << dtype << "\n";
        return kExitUsage;
    }
    std::vector<BenchRow> rows;
    for (int64_t n : lengths) {
        const BenchRow row = dtype == "f32" ? bench_length<float>(n, channels, state_dim, repeats)
                                            : bench_length<double>(n, channels, state_dim, repeats);
        json line = {{"n", row.n}, {"mean_ns", row.mean_ns}, {"stddev_ns", row.stddev_ns}};
        std::cout << line.dump() << "\n";
        rows.push_back(row);
    }
    json summary = {{"slope", fit_loglog_slope(rows)},
                    {"channels", channels},
                    {"repeats", repeats},
                    {"dtype", dtype}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_train(TrainConfig cfg, const std::string& log_path, const std::string& params_path) {
    const TrainResult result = train_toy(cfg);
    if (result.diverged) {
        std::cerr << "training diverged (non-finite loss) at step " << result.diverged_step << "\n";
        return kExitRuntime;
    }
    std::ofstream log(log_path, std::ios::binary);
    for (const auto& line : result.log_lines) log << line << "\n";
    if (!log) throw std::runtime_error("cannot write " + log_path);
    save_model(params_path, result.model);
    json summary = {{"initial_loss", result.initial_loss},
                    {"final_loss", result.final_loss},
                    {"log", log_path},
                    {"params", params_path}};
    if (result.final_eval.miou_defined) summary["miou"] = result.final_eval.miou;
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const std::string& params_path, const std::string& seeds_arg,
             const std::string& out_path) {
    uint64_t start = 0;
    int64_t count = 0;
    {
        const auto pos = seeds_arg.find(':');
        try {
            if (pos == std::string::npos) throw std::invalid_argument(seeds_arg);
            start = std::stoull(seeds_arg.substr(0, pos));
            count = std::stoll(seeds_arg.substr(pos + 1));
            if (count < 0) throw std::invalid_argument(seeds_arg);
        } catch (const std::exception&) {
            std::cerr << "expected --seeds START:COUNT, got '" << seeds_arg << "'\n";
            return kExitUsage;
        }
    }
    const Model model = load_model(params_path);
    std::vector<uint64_t> seeds;
    for (int64_t i = 0; i < count; ++i) seeds.push_back(start + static_cast<uint64_t>(i));
    const MetricsReport rep = evaluate(model, seeds);
    json out = {{"scenes", count},
                {"total_voxels", rep.total_voxels},
                {"miou_defined", rep.miou_defined},
                {"geometry_defined", rep.geometry_defined}};
    if (rep.miou_defined) out["miou"] = rep.miou;
    if (rep.geometry_defined) out["geometry_iou"] = rep.geometry_iou;
    json iou = json::array();
    for (double v : rep.iou) {
        if (std::isnan(v))
            iou.push_back(nullptr);
        else
            iou.push_back(v);
    }
    out["iou"] = iou;
    const std::string text = out.dump() + "\n";
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        f << text;
        if (!f) throw std::runtime_error("cannot write " + out_path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_env();

    CLI::App app{"voxel-sequence toolkit"};
    app.require_subcommand(1);

    // order
    auto* order = app.add_subcommand("order", "build a reordering and write a VORD file");
    std::string order_scheme, order_dims, order_out;
    bool order_snake = false;
    order->add_option("--scheme", order_scheme, "ordering scheme")->required();
    order->add_option("--dims", order_dims, "grid dims WxHxD")->required();
    order->add_flag("--z-snake", order_snake, "alternate z direction per column");
    order->add_option("--out", order_out, "output path")->required();

    // locality
    auto* locality = app.add_subcommand("locality", "compare neighbor locality across schemes");
    std::string loc_dims, loc_schemes, loc_csv;
    locality->add_option("--dims", loc_dims, "grid dims WxHxD")->required();
    locality->add_option("--schemes", loc_schemes, "comma-separated scheme list")->required();
    locality->add_option("--csv", loc_csv, "also write the CSV here");

    // bench
    auto* bench = app.add_subcommand("bench", "time the block forward across sequence lengths");
    std::string bench_lengths = "4096,8192,16384,32768,65536,131072,262144";
    int64_t bench_channels = 16, bench_repeats = 3, bench_state = 8;
    std::string bench_dtype = "f32";
    bench->add_option("--lengths", bench_lengths, "comma-separated sequence lengths");
    bench->add_option("--channels", bench_channels, "model channels");
    bench->add_option("--repeats", bench_repeats, "timed repeats per length")
        ->check(CLI::PositiveNumber);
    bench->add_option("--state", bench_state, "SSM state dimension");
    bench->add_option("--dtype", bench_dtype, "f32 (fast mode) or f64");

    // train-toy
    auto* train = app.add_subcommand("train-toy", "train on synthetic scenes");
    TrainConfig cfg;
    std::string train_dims = "16x16x8", train_scheme = "hp-hilbert2d";
    std::string train_config_path, train_log = "train_log.jsonl", train_params = "model.vprm";
    bool train_snake = false;
    train->add_option("--config", train_config_path, "JSON config file");
    train->add_option("--steps", cfg.steps, "gradient steps");
    train->add_option("--lr", cfg.learning_rate, "learning rate");
    train->add_option("--seed", cfg.seed, "base seed");
    train->add_option("--dims", train_dims, "scene dims WxHxD");
    train->add_option("--channels", cfg.dims.c, "feature channels");
    train->add_option("--classes", cfg.num_classes, "class count K");
    train->add_option("--scheme", train_scheme, "ordering scheme");
    train->add_flag("--z-snake", train_snake, "alternate z direction per column");
    train->add_option("--batch", cfg.batch, "scenes per step");
    train->add_option("--eval-every", cfg.eval_every, "evaluation period in steps");
    train->add_option("--eval-scenes", cfg.eval_scenes, "held-out scenes per evaluation");
    train->add_option("--sigma", cfg.noise_sigma, "feature noise sigma");
    train->add_option("--groups", cfg.hierarchy.groups, "encoder/decoder groups");
    train->add_option("--blocks", cfg.hierarchy.blocks_per_group, "blocks per group");
    train->add_option("--state", cfg.hierarchy.state_dim, "SSM state dimension");
    train->add_option("--log", train_log, "training log path (line-delimited JSON)");
    train->add_option("--params", train_params, "trained parameters path");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate saved parameters on synthetic scenes");
    std::string eval_params, eval_seeds, eval_out;
    eval->add_option("--params", eval_params, "VPRM parameters file")->required();
    eval->add_option("--seeds", eval_seeds, "scene seeds as START:COUNT")->required();
    eval->add_option("--out", eval_out, "also write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (order->parsed()) return cmd_order(order_scheme, order_dims, order_snake, order_out);
        if (locality->parsed()) return cmd_locality(loc_dims, loc_schemes, loc_csv);
        if (bench->parsed())
            return cmd_bench(bench_lengths, bench_channels, bench_repeats, bench_state, bench_dtype);
        if (train->parsed()) {
            if (!train_config_path.empty()) {
                std::ifstream f(train_config_path);
                if (!f) throw std::runtime_error("cannot read " + train_config_path);
                json j = json::parse(f);
                if (j.contains("steps") && !train->count("--steps")) cfg.steps = j["steps"];
                if (j.contains("lr") && !train->count("--lr")) cfg.learning_rate = j["lr"];
                if (j.contains("seed") && !train->count("--seed")) cfg.seed = j["seed"];
                if (j.contains("dims") && !train->count("--dims")) train_dims = j["dims"];
                if (j.contains("channels") && !train->count("--channels")) cfg.dims.c = j["channels"];
                if (j.contains("classes") && !train->count("--classes")) cfg.num_classes = j["classes"];
                if (j.contains("scheme") && !train->count("--scheme")) train_scheme = j["scheme"];
                if (j.contains("z_snake") && !train->count("--z-snake")) train_snake = j["z_snake"];
                if (j.contains("sigma") && !train->count("--sigma")) cfg.noise_sigma = j["sigma"];
                if (j.contains("steps_per_eval") && !train->count("--eval-every"))
                    cfg.eval_every = j["steps_per_eval"];
            }
            const GridDims spatial = parse_dims(train_dims);
            cfg.dims.w = spatial.w;
            cfg.dims.h = spatial.h;
            cfg.dims.d = spatial.d;
            try {
                cfg.hierarchy.scheme.kind = parse_scheme(train_scheme);
            } catch (const std::invalid_argument& e) {
                std::cerr << e.what() << "\n";
                return kExitUsage;
            }
            cfg.hierarchy.scheme.z_snake = train_snake;
            return cmd_train(cfg, train_log, train_params);
        }
        if (eval->parsed()) return cmd_eval(eval_params, eval_seeds, eval_out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
