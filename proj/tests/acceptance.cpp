// Acceptance suite: each criterion prints one PASS/FAIL line (plus detail
// rows) and the process exit code reports the selected criterion's result.
// Reference figures and tolerances are pinned here.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mevit/functional.hpp"
#include "mevit/numerics.hpp"
#include "mevit/packed.hpp"
#include "mevit/scale.hpp"
#include "mevit/schedule.hpp"
#include "mevit/traffic.hpp"
#include "mevit/weights.hpp"
#include "oracles.hpp"

using namespace mevit;

namespace {

struct Row {
    ModelConfig model;
    HardwareConfig hw;
    ScheduleResult run;
    TrafficReport me;
    TrafficReport base;
};

Row make_row(const std::string& label, int psys) {
    Row r;
    r.model = find_builtin_model(label);
    r.hw.psys = psys;
    r.run = run_inference_schedule(r.model, r.hw);
    r.me = single_load_traffic(r.model, r.hw, r.run);
    r.base = baseline_traffic(r.model, r.hw, r.run.report);
    return r;
}

bool within(double value, double reference, double tol) {
    return std::fabs(value - reference) <= tol * reference;
}

// 1. packed_multiply(a, pack(b, c)) == (a*b, a*c) for all 2^24 triples.
bool criterion1() {
    std::int64_t failures = 0;
    for (int a = -128; a <= 127; ++a)
        for (int b = -128; b <= 127; ++b)
            for (int c = -128; c <= 127; ++c) {
                PackedProduct p =
                    packed_multiply(std::int8_t(a), pack_operands(std::int8_t(b), std::int8_t(c)));
                if (p.hi != a * b || p.lo != a * c) ++failures;
            }
    std::printf("  2^24 signed triples checked, %lld mismatches\n", (long long)failures);
    return failures == 0;
}

// 2. Schedule replay activations == functional forward, bit-exact, DeiT-T.
bool criterion2() {
    bool ok = true;
    for (int psys : {16, 32}) {
        ModelConfig m = find_builtin_model("deit-t");
        HardwareConfig hw;
        hw.psys = psys;
        EncoderWeights w = generate_weights(m, hw, 2024);
        TileMatrix patches = generate_image_patches(m, hw, 2024);
        TileMatrix ref = encoder_forward(patches, w, hw);
        ScheduleResult run = run_inference_schedule(m, hw, &w, &patches);
        std::int64_t mismatches = -1;
        if (run.has_output && run.output.rows == ref.rows && run.output.cols == ref.cols) {
            mismatches = 0;
            for (int r = 0; r < ref.rows; ++r)
                for (int c = 0; c < ref.cols; ++c)
                    if (run.output.at(r, c) != ref.at(r, c)) ++mismatches;
        }
        std::printf("  deit-t psys=%d: %lld mismatching elements of %d\n", psys,
                    (long long)mismatches, ref.rows * ref.cols);
        ok = ok && mismatches == 0;
    }
    return ok;
}

// 3. Theoretical latency/FPS at 300 MHz within +-10% of the reference table.
bool criterion3() {
    struct Ref {
        const char* label;
        int psys;
        double fps;
    };
    const Ref refs[] = {
        {"vit-b", 32, 22.38}, {"deit-b", 32, 26.40}, {"deit-s", 32, 98.25},
        {"deit-t", 32, 352.27}, {"vit-b", 16, 6.08}, {"deit-b", 16, 6.64},
        {"deit-s", 16, 25.53}, {"deit-t", 16, 94.13},
    };
    bool ok = true;
    for (const auto& ref : refs) {
        Row r = make_row(ref.label, ref.psys);
        double err = (r.run.report.fps - ref.fps) / ref.fps;
        bool pass = within(r.run.report.fps, ref.fps, 0.10);
        std::printf("  %-6s psys=%2d: %7.2f fps vs %7.2f reference (%+5.1f%%) %s\n", ref.label,
                    ref.psys, r.run.report.fps, ref.fps, err * 100, pass ? "ok" : "FAIL");
        ok = ok && pass;
    }
    // latency form of the DeiT-B figure
    Row b = make_row("deit-b", 32);
    double ms = b.run.report.latency_s * 1e3;
    bool pass = within(ms, 37.86, 0.10);
    std::printf("  deit-b psys=32 latency %.2f ms vs 37.86 reference %s\n", ms,
                pass ? "ok" : "FAIL");
    return ok && pass;
}

// 4. MLP mode fraction of total cycles in [0.55, 0.65] for all four models.
bool criterion4() {
    bool ok = true;
    for (const auto& label : {"vit-b", "deit-b", "deit-s", "deit-t"}) {
        Row r = make_row(label, 32);
        double f = r.run.report.mlp_fraction;
        bool pass = f >= 0.55 && f <= 0.65;
        std::printf("  %-6s mlp fraction %.4f %s\n", label, f, pass ? "ok" : "FAIL");
        ok = ok && pass;
    }
    return ok;
}

// 5. Total bandwidth-improvement ratios within +-15% of the reference table;
// peak exceeds total and lands in MSA mode everywhere.
bool criterion5() {
    struct Ref {
        const char* label;
        int psys;
        double total;
    };
    const Ref refs[] = {
        {"vit-b", 32, 9.22},  {"deit-b", 32, 8.25},  {"deit-s", 32, 7.06},
        {"deit-t", 32, 8.77}, {"vit-b", 16, 17.14},  {"deit-b", 16, 16.62},
        {"deit-s", 16, 17.53}, {"deit-t", 16, 17.89},
    };
    bool ok = true;
    for (const auto& ref : refs) {
        Row r = make_row(ref.label, ref.psys);
        ImprovementRatios ir = improvement_ratios(r.me, r.base);
        bool in_tol = within(ir.total_ratio, ref.total, 0.15);
        bool ordering = ir.peak_ratio > ir.total_ratio && ir.peak_mode == Mode::Msa;
        std::printf("  %-6s psys=%2d: total %5.2f vs %5.2f (%+5.1f%%) peak %5.2f in %s %s\n",
                    ref.label, ref.psys, ir.total_ratio, ref.total,
                    (ir.total_ratio - ref.total) / ref.total * 100, ir.peak_ratio,
                    mode_name(ir.peak_mode), in_tol && ordering ? "ok" : "FAIL");
        ok = ok && in_tol && ordering;
    }
    return ok;
}

// 6. Efficiency-curve local maxima over P in (8, 80] are exactly
// {11, 17, 33, 50, 66}.
bool criterion6() {
    auto sweep = efficiency_sweep(find_builtin_model("deit-b"), 4, 80);
    auto peaks = local_maxima(sweep);
    std::vector<int> got;
    for (int p : peaks)
        if (p > 8) got.push_back(p);
    std::vector<int> want = {11, 17, 33, 50, 66};
    std::string s;
    for (int p : got) s += std::to_string(p) + " ";
    std::printf("  local maxima above P=8: %s(expected 11 17 33 50 66)\n", s.c_str());
    return got == want;
}

// 7. Multi-PE scaling: 5 unconstrained PEs for every model under the
// single-load policy; baseline knees at 3/3/2/2; 5-PE DeiT-B throughput
// within +-10% of 132.04 FPS; peak achieved GOPS within +-3% of 2682
// against the 3072 theoretical maximum.
bool criterion7() {
    bool ok = true;
    const std::map<std::string, int> knee_ref = {
        {"vit-b", 3}, {"deit-b", 3}, {"deit-s", 2}, {"deit-t", 2}};
    for (const auto& [label, knee_expected] : knee_ref) {
        Row r = make_row(label, 32);
        MultiPeResult me1 = multi_pe(r.model, r.hw, 1, TrafficPolicy::MeVit, r.run.report,
                                     r.me, r.base);
        MultiPeResult b1 = multi_pe(r.model, r.hw, 1, TrafficPolicy::Baseline, r.run.report,
                                    r.me, r.base);
        int me_k = max_unconstrained_pes(me1, r.hw, 16);
        int base_k = max_unconstrained_pes(b1, r.hw, 16);
        bool pass_me = me_k >= 5;
        bool pass_base = base_k == knee_expected;
        std::printf("  %-6s: me-vit unconstrained k=%d (need >=5) %s; baseline knee k=%d vs %d %s\n",
                    label.c_str(), me_k, pass_me ? "ok" : "FAIL", base_k, knee_expected,
                    pass_base ? "ok" : "FAIL");
        ok = ok && pass_me && pass_base;
    }
    Row b = make_row("deit-b", 32);
    MultiPeResult five =
        multi_pe(b.model, b.hw, 5, TrafficPolicy::MeVit, b.run.report, b.me, b.base);
    bool fps_ok = within(five.fps, 132.04, 0.10);
    std::printf("  5-PE deit-b: %.2f fps vs 132.04 (%+.1f%%) %s\n", five.fps,
                (five.fps - 132.04) / 132.04 * 100, fps_ok ? "ok" : "FAIL");
    bool gops_ok = within(five.array_gops_unthrottled, 2682.0, 0.03);
    std::printf("  5-PE deit-b achieved %.0f GOPS vs 2682 (peak %.0f) %s\n",
                five.array_gops_unthrottled, five.peak_gops, gops_ok ? "ok" : "FAIL");
    return ok && fps_ok && gops_ok;
}

// 8. BRAM estimator: 160 + 64 + 64 = 288 exactly for the base models;
// deltas for DeiT-S/T reported, not asserted.
bool criterion8() {
    bool ok = true;
    HardwareConfig hw;
    hw.psys = 32;
    for (const auto& label : {"vit-b", "deit-b"}) {
        BramEstimate e = bram_estimate(find_builtin_model(label), hw);
        bool pass = e.buffers.size() == 3 && e.buffers[0].banks == 160 &&
                    e.buffers[1].banks == 64 && e.buffers[2].banks == 64 &&
                    e.total_banks == 288;
        std::printf("  %-6s: %d + %d + %d = %d banks %s\n", label, e.buffers[0].banks,
                    e.buffers[1].banks, e.buffers[2].banks, e.total_banks,
                    pass ? "ok" : "FAIL");
        ok = ok && pass;
    }
    for (const auto& label : {"deit-s", "deit-t"}) {
        BramEstimate e = bram_estimate(find_builtin_model(label), hw);
        std::printf("  %-6s: %d banks, reference %d, delta %+d (reported only)\n", label,
                    e.total_banks, e.reference_total, e.total_banks - e.reference_total);
    }
    return ok;
}

// 9. Every simulate run passes the single-load audit; fault-injected traces
// fail it.
bool criterion9() {
    bool ok = true;
    for (const auto& label : {"vit-b", "deit-b", "deit-s", "deit-t"}) {
        for (int psys : {16, 32}) {
            ModelConfig m = find_builtin_model(label);
            HardwareConfig hw;
            hw.psys = psys;
            ScheduleResult run = run_inference_schedule(m, hw);
            DerivedDims d = derive_dims(m, hw);
            QuantPlan plan;
            auto manifest = manifest_for(m, d, plan);
            std::int64_t input = std::int64_t(d.num_patches) * d.patch_dim;
            AuditVerdict v = audit_single_load(run.trace, manifest, input);
            if (!v.pass)
                std::printf("  %s psys=%d FAILS audit: %s\n", label, psys,
                            v.failures.empty() ? "?" : v.failures[0].c_str());
            ok = ok && v.pass;

            ScheduleTrace faulty = run.trace;
            faulty.dram.push_back(faulty.dram.front());
            AuditVerdict vf = audit_single_load(faulty, manifest, input);
            ok = ok && !vf.pass && vf.duplicate_load_count == 1;
        }
    }
    std::printf("  all four models, both array sizes: audit pass, injected faults caught: %s\n",
                ok ? "yes" : "NO");
    return ok;
}

// 10. Numerics: pseudo-softmax within the measured bound of the wide oracle
// with range/argmax preserved; layernorm within one quantization step;
// single-pass and two-pass variance agree exactly in integers.
bool criterion10() {
    bool ok = true;
    std::mt19937 gen(321);

    double sm_max = 0;
    bool sm_props = true;
    for (int trial = 0; trial < 400; ++trial) {
        int n = 2 + int(gen() % 256);  // rows up to length 257
        std::vector<int> xb(static_cast<size_t>(n));
        for (auto& x : xb) x = 64 + int(gen() % 128);
        auto p = pseudo_softmax_row(xb);
        std::vector<int> unbiased;
        for (int x : xb) unbiased.push_back(x - kExpBias);
        auto exact = oracle::base2_softmax(unbiased);
        size_t arg_in = 0, arg_out = 0;
        for (size_t i = 0; i < p.size(); ++i) {
            if (p[i] > 256) sm_props = false;
            sm_max = std::max(sm_max, std::fabs(double(p[i]) / 256.0 - double(exact[i])));
            if (xb[i] > xb[arg_in]) arg_in = i;
            if (p[i] > p[arg_out]) arg_out = i;
        }
        if (xb[arg_out] != xb[arg_in]) sm_props = false;
    }
    double sm_bound = 1.0 / 128.0;  // documented allowance 2^-7 (+ N*2^-8 slack unused)
    std::printf("  pseudo-softmax: measured max error %.6f of bound %.6f, range/argmax %s\n",
                sm_max, sm_bound, sm_props ? "ok" : "FAIL");
    ok = ok && sm_max <= sm_bound && sm_props;

    QuantPlan plan;
    double ln_max = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int n = 32 + int(gen() % 3040);
        std::vector<std::int8_t> row(static_cast<size_t>(n)), out(static_cast<size_t>(n));
        for (auto& v : row) v = std::int8_t(gen());
        std::vector<std::int8_t> gamma(static_cast<size_t>(n), 64), beta(static_cast<size_t>(n), 0);
        LayerNormRowState st = layernorm_pass1(row.data(), n);
        layernorm_pass2(row.data(), n, st, gamma.data(), plan.gamma_shift, beta.data(),
                        plan.beta_shift, plan.ln_shift, out.data());
        auto exact = oracle::real_layernorm(row, std::pow(2.0, -16));
        for (int j = 0; j < n; ++j)
            if (std::fabs(exact[size_t(j)]) < 3.9)
                ln_max = std::max(ln_max,
                                  std::fabs(double(out[size_t(j)]) / 32.0 - exact[size_t(j)]));
    }
    double step = 1.0 / 32.0;
    std::printf("  layernorm: measured max error %.6f of one step %.6f\n", ln_max, step);
    ok = ok && ln_max <= step;

    bool var_ok = true;
    for (int trial = 0; trial < 200; ++trial) {
        int n = 4 + int(gen() % 3068);
        std::vector<std::int8_t> row(static_cast<size_t>(n));
        for (auto& v : row) v = std::int8_t(gen());
        LayerNormRowState st = layernorm_pass1(row.data(), n);
        std::int64_t lhs = 0;
        for (auto v : row) {
            std::int64_t dd = std::int64_t(n) * v - st.sum;
            lhs += dd * dd;
        }
        if (lhs != std::int64_t(n) * (std::int64_t(n) * st.sq_sum -
                                      std::int64_t(st.sum) * st.sum))
            var_ok = false;
    }
    std::printf("  variance identity (two-pass vs parallel form): %s\n",
                var_ok ? "exact" : "FAIL");
    return ok && var_ok;
}

}  // namespace

int main(int argc, char** argv) {
    struct Entry {
        int id;
        const char* name;
        bool (*fn)();
    };
    const Entry entries[] = {
        {1, "packing exhaustiveness", criterion1},
        {2, "schedule/functional equivalence", criterion2},
        {3, "latency reproduction", criterion3},
        {4, "mode breakdown", criterion4},
        {5, "bandwidth improvement", criterion5},
        {6, "efficiency sweep peaks", criterion6},
        {7, "multi-pe scaling", criterion7},
        {8, "bram estimator", criterion8},
        {9, "single-load audit", criterion9},
        {10, "numerics bounds", criterion10},
    };
    int only = argc > 1 ? std::atoi(argv[1]) : 0;
    bool all_ok = true;
    for (const auto& e : entries) {
        if (only && e.id != only) continue;
        std::printf("criterion %d (%s):\n", e.id, e.name);
        bool ok = e.fn();
        std::printf("criterion %d: %s\n", e.id, ok ? "PASS" : "FAIL");
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
