// Command-line surface: simulate, verify, sweep, traffic, bram.
#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "mevit/functional.hpp"
#include "mevit/packed.hpp"
#include "mevit/report.hpp"
#include "mevit/scale.hpp"
#include "mevit/schedule.hpp"
#include "mevit/traffic.hpp"
#include "mevit/weights.hpp"

namespace fs = std::filesystem;
using namespace mevit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitProperty = 2;

struct CommonOpts {
    std::string model_label = "deit-b";
    std::string model_config;
    std::string hw_config;
    int psys = 0;
    double freq = 0;
    double bandwidth = 0;
    std::string out_dir;
    std::uint64_t seed = 1;
};

void add_common(CLI::App* app, CommonOpts& o) {
    app->add_option("--model", o.model_label, "builtin model label (vit-b, deit-b, deit-s, deit-t)");
    app->add_option("--model-config", o.model_config, "model config file (key = value)");
    app->add_option("--hw-config", o.hw_config, "hardware config file (key = value)");
    app->add_option("--psys", o.psys, "systolic array size");
    app->add_option("--freq", o.freq, "clock frequency in Hz");
    app->add_option("--bandwidth", o.bandwidth, "DRAM bandwidth in bytes/s");
    app->add_option("--out", o.out_dir, "output directory (default $MEVIT_OUT_DIR or .)");
    app->add_option("--seed", o.seed, "seed for generated inputs");
}

ModelConfig resolve_model(const CommonOpts& o) {
    if (!o.model_config.empty()) return load_model_config(o.model_config);
    return find_builtin_model(o.model_label);
}

HardwareConfig resolve_hw(const CommonOpts& o) {
    HardwareConfig hw;
    if (!o.hw_config.empty()) hw = load_hw_config(o.hw_config);
    if (o.psys > 0) hw.psys = o.psys;
    if (o.freq > 0) hw.clock_hz = o.freq;
    if (o.bandwidth > 0) hw.dram_bandwidth = o.bandwidth;
    hw.validate();
    return hw;
}

fs::path resolve_out_dir(const CommonOpts& o) {
    std::string dir = o.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("MEVIT_OUT_DIR");
        dir = env ? env : ".";
    }
    fs::create_directories(dir);
    return dir;
}

RunManifest make_manifest(const std::string& cmd, const CommonOpts& o, const ModelConfig& m,
                          const HardwareConfig& hw, const fs::path& out) {
    RunManifest man;
    man.command = cmd;
    man.model_label = o.model_label;
    man.model_config_path = o.model_config;
    man.hw_config_path = o.hw_config;
    man.seed = o.seed;
    man.out_dir = out.string();
    man.model = m;
    man.hw = hw;
    return man;
}

int cmd_simulate(const CommonOpts& o, bool inject_single_load_fault) {
    ModelConfig model = resolve_model(o);
    HardwareConfig hw = resolve_hw(o);
    fs::path out = resolve_out_dir(o);
    RunManifest man = make_manifest("simulate", o, model, hw, out);

    ScheduleResult run = run_inference_schedule(model, hw);
    if (inject_single_load_fault && !run.trace.dram.empty())
        run.trace.dram.push_back(run.trace.dram.front());

    DerivedDims d = derive_dims(model, hw);
    QuantPlan plan;
    auto manifest = manifest_for(model, d, plan);
    std::int64_t input_bytes = std::int64_t(d.num_patches) * d.patch_dim;
    AuditVerdict audit = audit_single_load(run.trace, manifest, input_bytes);

    TrafficReport traffic;
    if (audit.pass) {
        traffic = single_load_traffic(model, hw, run);
    } else {
        for (const auto& tx : run.trace.dram) {
            auto& m = traffic.modes[size_t(tx.mode)];
            (tx.store ? m.bytes_stored : m.bytes_loaded) += tx.bytes;
        }
    }

    write_summary(man, run.report, traffic, audit, (out / "summary.txt").string());
    write_mode_breakdown_csv(man, run.report, (out / "mode_breakdown.csv").string());
    write_bandwidth_breakdown_csv(man, traffic, (out / "bandwidth_breakdown.csv").string());
    write_trace(run.trace, (out / "trace.log").string());
    write_dram_log(run.trace, (out / "dram.log").string());

    std::cout << model.name << " psys=" << hw.psys << ": latency " << run.report.latency_s * 1e3
              << " ms, " << run.report.fps << " fps, mlp fraction " << run.report.mlp_fraction
              << ", avg bandwidth " << traffic.average_bandwidth / 1e9 << " GB/s\n"
              << "single-load audit: " << (audit.pass ? "pass" : "FAIL") << "\n"
              << "reports written to " << out.string() << "\n";
    return audit.pass ? kExitOk : kExitProperty;
}

int cmd_traffic(const CommonOpts& o) {
    ModelConfig model = resolve_model(o);
    HardwareConfig hw = resolve_hw(o);
    fs::path out = resolve_out_dir(o);
    RunManifest man = make_manifest("traffic", o, model, hw, out);

    ScheduleResult run = run_inference_schedule(model, hw);
    TrafficReport me = single_load_traffic(model, hw, run);
    TrafficReport base = baseline_traffic(model, hw, run.report);
    ImprovementRatios ratios = improvement_ratios(me, base);

    std::ostringstream note;
    note << "model=" << model.name << " psys=" << hw.psys
         << " total_ratio=" << ratios.total_ratio << " peak_ratio=" << ratios.peak_ratio
         << " peak_mode=" << mode_name(ratios.peak_mode);
    write_traffic_csv(me, &base, (out / "traffic.csv").string(), note.str());
    std::cout << model.name << " psys=" << hw.psys << ": total improvement "
              << ratios.total_ratio << "x, peak " << ratios.peak_ratio << "x in "
              << mode_name(ratios.peak_mode) << " mode\n"
              << "table written to " << (out / "traffic.csv").string() << "\n";
    (void)man;
    return kExitOk;
}

int cmd_bram(const CommonOpts& o) {
    ModelConfig model = resolve_model(o);
    HardwareConfig hw = resolve_hw(o);
    BramEstimate e = bram_estimate(model, hw);
    std::cout << model.name << " psys=" << hw.psys << " bank rounding " << e.rounding << "\n";
    for (const auto& b : e.buffers)
        std::cout << "  " << b.name << ": " << b.entries << " entries -> " << b.banks
                  << " BRAM36\n";
    std::cout << "  total: " << e.total_banks << " BRAM36";
    if (e.reference_total)
        std::cout << " (reference design total " << e.reference_total << ", delta "
                  << e.total_banks - e.reference_total << ")";
    std::cout << "\n";
    return kExitOk;
}

int cmd_sweep(const CommonOpts& o, const std::string& kind, int p_lo, int p_hi, int k_lo,
              int k_hi, const std::string& policy_name) {
    ModelConfig model = resolve_model(o);
    HardwareConfig hw = resolve_hw(o);
    fs::path out = resolve_out_dir(o);
    RunManifest man = make_manifest("sweep-" + kind, o, model, hw, out);

    if (kind == "efficiency") {
        if (p_lo < 4 || p_hi > 128 || p_hi < p_lo) {
            std::cerr << "invalid --p range (expected within [4, 128])\n";
            return kExitUsage;
        }
        // fan out across worker threads, one stripe each
        std::vector<EfficiencyPoint> pts(size_t(p_hi - p_lo + 1));
        unsigned n_threads = std::max(1u, std::thread::hardware_concurrency());
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_threads; ++w)
            pool.emplace_back([&, w]() {
                for (size_t i = w; i < pts.size(); i += n_threads)
                    pts[i] = {p_lo + int(i), efficiency_at(model, p_lo + int(i))};
            });
        for (auto& th : pool) th.join();

        std::ofstream f(out / "efficiency.csv");
        write_header(f, man);
        f << "psys,efficiency\n";
        for (const auto& pt : pts) f << pt.psys << "," << pt.efficiency << "\n";
        std::vector<int> peaks = local_maxima(pts);
        std::ofstream pf(out / "efficiency_peaks.txt");
        write_header(pf, man);
        std::cout << "efficiency peaks:";
        pf << "local maxima:";
        for (int p : peaks) {
            std::cout << " " << p;
            pf << " " << p;
        }
        std::cout << "\n";
        pf << "\n";
        return kExitOk;
    }

    if (kind == "multi-pe") {
        if (k_lo < 1 || k_hi < k_lo) {
            std::cerr << "invalid --k range\n";
            return kExitUsage;
        }
        TrafficPolicy policy =
            policy_name == "baseline" ? TrafficPolicy::Baseline : TrafficPolicy::MeVit;
        ScheduleResult run = run_inference_schedule(model, hw);
        TrafficReport me = single_load_traffic(model, hw, run);
        TrafficReport base = baseline_traffic(model, hw, run.report);
        std::ofstream f(out / "multi_pe.csv");
        write_header(f, man);
        f << "pe_count,fps,gops,array_gops,peak_gops,bandwidth_demand_gbs,limited\n";
        int knee = 0;
        for (int k = k_lo; k <= k_hi; ++k) {
            MultiPeResult r = multi_pe(model, hw, k, policy, run.report, me, base);
            if (!r.bandwidth_limited) knee = k;
            f << k << "," << r.fps << "," << r.ops / 1e9 << "," << r.array_gops_unthrottled
              << "," << r.peak_gops << "," << r.bandwidth_demand / 1e9 << ","
              << (r.bandwidth_limited ? 1 : 0) << "\n";
        }
        std::ofstream kf(out / "multi_pe_knee.txt");
        write_header(kf, man);
        kf << "policy = " << policy_name << "\n"
           << "last_unconstrained_pe_count = " << knee << "\n"
           << "bandwidth_cap_gbs = " << hw.dram_bandwidth / 1e9 << "\n";
        std::cout << "multi-pe sweep (" << policy_name << "): last unconstrained k = " << knee
                  << "\n";
        return kExitOk;
    }

    if (kind == "roofline") {
        std::ofstream f(out / "roofline.csv");
        write_header(f, man);
        f << "model,intensity_ops_per_byte,peak_gops,attainable_gops,achieved_gops,array_gops\n";
        for (const auto& m : builtin_models()) {
            ScheduleResult run = run_inference_schedule(m, hw);
            TrafficReport me = single_load_traffic(m, hw, run);
            RooflinePoint r = roofline(m, hw, me, run.report);
            f << m.name << "," << r.operational_intensity << "," << r.peak_ops / 1e9 << ","
              << r.attainable_ops / 1e9 << "," << r.achieved_ops / 1e9 << ","
              << r.array_ops / 1e9 << "\n";
        }
        std::cout << "roofline points written to " << (out / "roofline.csv").string() << "\n";
        return kExitOk;
    }

    std::cerr << "unknown sweep kind: " << kind << "\n";
    return kExitUsage;
}

int cmd_verify(const CommonOpts& o, bool quick, const std::string& inject_fault) {
    bool all_pass = true;
    auto report = [&](const std::string& name, bool pass, const std::string& detail = "") {
        std::cout << (pass ? "PASS " : "FAIL ") << name;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n";
        all_pass = all_pass && pass;
    };

    // 1. DSP packing vs independent scalar multiplies.
    {
        bool broken = inject_fault == "packing";
        bool ok = true;
        std::int64_t checked = 0;
        auto check = [&](int a, int b, int c) {
            PackedProduct pr = packed_multiply(std::int8_t(a), pack_operands(std::int8_t(b), std::int8_t(c)));
            std::int32_t hi = pr.hi + (broken && a == 77 && b == -77 ? 1 : 0);
            return hi == a * b && pr.lo == a * c;
        };
        if (quick) {
            std::mt19937 gen(12345);
            for (int i = 0; ok && i < 1'000'000; ++i)
                ok = check(int(std::int8_t(gen())), int(std::int8_t(gen())), int(std::int8_t(gen()))),
                ++checked;
        } else {
            for (int a = -128; ok && a <= 127; ++a)
                for (int b = -128; ok && b <= 127; ++b)
                    for (int c = -128; c <= 127; ++c, ++checked)
                        if (!check(a, b, c)) {
                            ok = false;
                            break;
                        }
        }
        report("dsp-packing", ok, std::to_string(checked) + " triples");
    }

    // 2. Pseudo-softmax vs wide-arithmetic base-2 softmax.
    {
        std::mt19937 gen(99);
        double max_err = 0;
        bool order_ok = true, range_ok = true;
        for (int trial = 0; trial < 200; ++trial) {
            int n = 2 + int(gen() % 256);
            std::vector<int> xb(static_cast<size_t>(n));
            for (auto& x : xb) x = int(gen() % 64) + 96;
            auto p = pseudo_softmax_row(xb);
            long double denom = 0;
            for (int x : xb) denom += std::pow(2.0L, x - kExpBias);
            size_t argmax_in = 0, argmax_out = 0;
            for (size_t i = 0; i < p.size(); ++i) {
                long double exact = std::pow(2.0L, xb[i] - kExpBias) / denom;
                max_err = std::max(max_err, double(std::fabs(double(p[i]) / 256.0 - double(exact))));
                if (xb[i] > xb[argmax_in]) argmax_in = i;
                if (p[i] > p[argmax_out]) argmax_out = i;
                if (p[i] > 256) range_ok = false;
            }
            if (xb[argmax_in] != xb[argmax_out]) order_ok = false;
        }
        report("pseudo-softmax-oracle", max_err <= 1.0 / 128.0 && order_ok && range_ok,
               "max |err| = " + std::to_string(max_err));
    }

    // 3. Two-pass layernorm vs real-arithmetic oracle.
    {
        std::mt19937 gen(7);
        QuantPlan plan;
        double max_err = 0;
        for (int trial = 0; trial < 200; ++trial) {
            int n = 64 + int(gen() % 512);
            std::vector<std::int8_t> row(static_cast<size_t>(n));
            for (auto& v : row) v = std::int8_t(gen());
            std::vector<std::int8_t> gamma(static_cast<size_t>(n), 64), beta(static_cast<size_t>(n), 0);
            std::vector<std::int8_t> out(static_cast<size_t>(n));
            LayerNormRowState st = layernorm_pass1(row.data(), n);
            layernorm_pass2(row.data(), n, st, gamma.data(), plan.gamma_shift, beta.data(),
                            plan.beta_shift, plan.ln_shift, out.data());
            double mean = 0, var = 0;
            for (auto v : row) mean += v;
            mean /= n;
            for (auto v : row) var += (v - mean) * (v - mean);
            var /= n;
            for (int j = 0; j < n; ++j) {
                double exact = (row[size_t(j)] - mean) / std::sqrt(var + std::pow(2.0, -16));
                double got = double(out[size_t(j)]) / 32.0;
                if (std::fabs(exact) < 3.9)  // away from int8 saturation
                    max_err = std::max(max_err, std::fabs(got - exact));
            }
        }
        report("layernorm-oracle", max_err <= 1.0 / 32.0, "max |err| = " + std::to_string(max_err));
    }

    // 4. Schedule replay == functional forward on a seeded model.
    {
        ModelConfig model = find_builtin_model("deit-t");
        if (quick) model.num_layers = 2;
        bool ok = true;
        for (int psys : {16, 32}) {
            HardwareConfig hw = resolve_hw(o);
            hw.psys = psys;
            EncoderWeights w = generate_weights(model, hw, o.seed);
            TileMatrix patches = generate_image_patches(model, hw, o.seed);
            TileMatrix ref = encoder_forward(patches, w, hw);
            ScheduleResult run = run_inference_schedule(model, hw, &w, &patches);
            bool same = run.has_output && ref.rows == run.output.rows &&
                        ref.cols == run.output.cols;
            if (same)
                for (int r = 0; r < ref.rows && same; ++r)
                    for (int c = 0; c < ref.cols; ++c)
                        if (ref.at(r, c) != run.output.at(r, c)) {
                            same = false;
                            break;
                        }
            ok = ok && same;
        }
        report("schedule-vs-functional", ok, quick ? "deit-t (2 layers), psys 16/32"
                                                   : "deit-t, psys 16/32");
    }

    // 5. Single-load audit on a fresh run, plus injected-fault detection.
    {
        ModelConfig model = find_builtin_model("deit-t");
        HardwareConfig hw = resolve_hw(o);
        ScheduleResult run = run_inference_schedule(model, hw);
        DerivedDims d = derive_dims(model, hw);
        QuantPlan plan;
        auto manifest = manifest_for(model, d, plan);
        std::int64_t input_bytes = std::int64_t(d.num_patches) * d.patch_dim;
        AuditVerdict v = audit_single_load(run.trace, manifest, input_bytes);
        bool ok = v.pass;
        if (inject_fault == "single-load") {
            run.trace.dram.push_back(run.trace.dram.front());
            ok = false;
        }
        ScheduleTrace faulty = run.trace;
        faulty.dram.push_back(faulty.dram.front());
        AuditVerdict vf = audit_single_load(faulty, manifest, input_bytes);
        report("single-load-audit", ok && !vf.pass && vf.duplicate_load_count == 1);
    }

    return all_pass ? kExitOk : kExitProperty;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-load ViT accelerator simulator"};
    app.require_subcommand(1);

    CommonOpts sim_o, ver_o, swp_o, trf_o, brm_o;
    bool quick = false;
    std::string inject_fault;
    std::string sweep_kind = "efficiency";
    std::string policy = "me-vit";
    int p_lo = 4, p_hi = 80, k_lo = 1, k_hi = 6;

    auto* sim = app.add_subcommand("simulate", "replay one inference and write reports");
    add_common(sim, sim_o);
    sim->add_flag("--inject-fault-single-load", "testing aid: duplicate one DRAM load")
        ->group("testing");

    auto* ver = app.add_subcommand("verify", "run numeric and schedule self-checks");
    add_common(ver, ver_o);
    ver->add_flag("--quick", quick, "sampled packing check instead of exhaustive");
    ver->add_option("--inject-fault", inject_fault, "testing aid: packing | single-load")
        ->group("testing");

    auto* swp = app.add_subcommand("sweep", "efficiency / multi-pe / roofline sweeps");
    add_common(swp, swp_o);
    swp->add_option("kind", sweep_kind, "efficiency | multi-pe | roofline");
    swp->add_option("--p-lo", p_lo, "sweep start for efficiency");
    swp->add_option("--p-hi", p_hi, "sweep end for efficiency");
    swp->add_option("--k-lo", k_lo, "first PE count");
    swp->add_option("--k-hi", k_hi, "last PE count");
    swp->add_option("--policy", policy, "me-vit | baseline");

    auto* trf = app.add_subcommand("traffic", "single-load vs baseline traffic table");
    add_common(trf, trf_o);

    auto* brm = app.add_subcommand("bram", "BRAM banking estimate");
    add_common(brm, brm_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitUsage : kExitOk;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_o, sim->count("--inject-fault-single-load") > 0);
        if (ver->parsed()) return cmd_verify(ver_o, quick, inject_fault);
        if (swp->parsed()) return cmd_sweep(swp_o, sweep_kind, p_lo, p_hi, k_lo, k_hi, policy);
        if (trf->parsed()) return cmd_traffic(trf_o);
        if (brm->parsed()) return cmd_bram(brm_o);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProperty;
    }
    return kExitUsage;
}
