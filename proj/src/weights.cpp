#include "mevit/weights.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mevit {

int QuantPlan::requant(int in_shift, int w_shift, int out_shift, int /*inner_dim*/) {
    int s = in_shift + w_shift - out_shift;
    if (s < 0) throw std::logic_error("negative requant shift");
    return s;
}

namespace {

// mt19937 byte stream; distributions are hand-rolled so the values are
// identical on every platform.
struct Rng {
    std::mt19937 gen;
    explicit Rng(std::uint64_t seed) : gen(std::uint32_t(seed ^ (seed >> 32))) {}
    std::int8_t next_i8() { return std::int8_t(gen() & 0xFF); }
    std::int8_t next_range(int lo, int hi) {  // inclusive
        return std::int8_t(lo + int(gen() % std::uint32_t(hi - lo + 1)));
    }
};

void fill(TileMatrix& m, Rng& rng) {
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) m.at(r, c) = rng.next_i8();
}

void fill(std::vector<std::int8_t>& v, size_t n, Rng& rng) {
    v.resize(n);
    for (auto& x : v) x = rng.next_i8();
}

}  // namespace

EncoderWeights generate_weights(const ModelConfig& model, const HardwareConfig& hw,
                                std::uint64_t seed) {
    EncoderWeights w;
    w.model = model;
    w.dims = derive_dims(model, hw);
    const int p = hw.psys;
    const int D = model.model_dim;
    Rng rng(seed);

    w.embed = TileMatrix(w.dims.patch_dim, D, p);
    fill(w.embed, rng);
    w.pos_embed = TileMatrix(w.dims.tokens, D, p);
    fill(w.pos_embed, rng);
    fill(w.class_token, size_t(D), rng);

    w.layers.resize(model.num_layers);
    for (auto& l : w.layers) {
        l.wq = TileMatrix(D, D, p);
        l.wk = TileMatrix(D, D, p);
        l.wv = TileMatrix(D, D, p);
        l.wo = TileMatrix(D, D, p);
        l.w_hidden = TileMatrix(D, w.dims.hidden_dim, p);
        l.w_out = TileMatrix(w.dims.hidden_dim, D, p);
        fill(l.wq, rng);
        fill(l.wk, rng);
        fill(l.wv, rng);
        fill(l.wo, rng);
        fill(l.w_hidden, rng);
        fill(l.w_out, rng);
        fill(l.b_hidden, size_t(w.dims.hidden_dim), rng);
        fill(l.b_out, size_t(D), rng);
        l.ln1_gamma.resize(D);
        l.ln2_gamma.resize(D);
        for (int j = 0; j < D; ++j) l.ln1_gamma[j] = rng.next_range(48, 80);  // ~1.0 at 2^-6
        for (int j = 0; j < D; ++j) l.ln2_gamma[j] = rng.next_range(48, 80);
        l.ln1_beta.resize(D);
        l.ln2_beta.resize(D);
        for (int j = 0; j < D; ++j) l.ln1_beta[j] = rng.next_range(-32, 32);
        for (int j = 0; j < D; ++j) l.ln2_beta[j] = rng.next_range(-32, 32);
    }
    w.final_gamma.resize(D);
    w.final_beta.resize(D);
    for (int j = 0; j < D; ++j) w.final_gamma[j] = rng.next_range(48, 80);
    for (int j = 0; j < D; ++j) w.final_beta[j] = rng.next_range(-32, 32);
    return w;
}

TileMatrix generate_image_patches(const ModelConfig& model, const HardwareConfig& hw,
                                  std::uint64_t seed) {
    DerivedDims d = derive_dims(model, hw);
    TileMatrix patches(d.num_patches, d.patch_dim, hw.psys);
    Rng rng(seed * 0x9E3779B97F4A7C15ull + 1);
    fill(patches, rng);
    return patches;
}

std::vector<TensorInfo> manifest_for(const ModelConfig& model, const DerivedDims& dims,
                                     const QuantPlan& plan) {
    std::vector<TensorInfo> out;
    std::int64_t off = 0;
    auto add = [&](const std::string& name, int rows, int cols, int shift) {
        out.push_back({name, rows, cols, shift, off});
        off += std::int64_t(rows) * cols;
    };
    add("embed", dims.patch_dim, model.model_dim, plan.weight_shift);
    add("pos_embed", dims.tokens, model.model_dim, plan.act_shift);
    add("class_token", 1, model.model_dim, plan.act_shift);
    for (int i = 0; i < model.num_layers; ++i) {
        std::string pre = "layer" + std::to_string(i) + ".";
        int D = model.model_dim;
        add(pre + "wq", D, D, plan.weight_shift);
        add(pre + "wk", D, D, plan.weight_shift);
        add(pre + "wv", D, D, plan.weight_shift);
        add(pre + "wo", D, D, plan.weight_shift);
        add(pre + "ln1_gamma", 1, D, plan.gamma_shift);
        add(pre + "ln1_beta", 1, D, plan.beta_shift);
        add(pre + "w_hidden", D, dims.hidden_dim, plan.weight_shift);
        add(pre + "b_hidden", 1, dims.hidden_dim, plan.bias_shift);
        add(pre + "w_out", dims.hidden_dim, D, plan.weight_shift);
        add(pre + "b_out", 1, D, plan.bias_shift);
        add(pre + "ln2_gamma", 1, D, plan.gamma_shift);
        add(pre + "ln2_beta", 1, D, plan.beta_shift);
    }
    add("final_gamma", 1, model.model_dim, plan.gamma_shift);
    add("final_beta", 1, model.model_dim, plan.beta_shift);
    return out;
}

std::vector<TensorInfo> EncoderWeights::manifest() const {
    return manifest_for(model, dims, plan);
}

std::int64_t EncoderWeights::param_bytes() const {
    std::int64_t total = 0;
    for (const auto& t : manifest()) total += t.bytes();
    return total;
}

namespace {

void write_tensor(std::ofstream& out, const TileMatrix& m) {
    for (int r = 0; r < m.rows; ++r)
        out.write(reinterpret_cast<const char*>(&m.at(r, 0)), m.cols);
}

void write_tensor(std::ofstream& out, const std::vector<std::int8_t>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size()));
}

void read_tensor(std::ifstream& in, TileMatrix& m) {
    for (int r = 0; r < m.rows; ++r)
        in.read(reinterpret_cast<char*>(&m.at(r, 0)), m.cols);
}

void read_tensor(std::ifstream& in, std::vector<std::int8_t>& v, size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n));
}

}  // namespace

void save_weights(const EncoderWeights& w, const std::string& bin_path,
                  const std::string& manifest_path) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + bin_path);
    write_tensor(bin, w.embed);
    write_tensor(bin, w.pos_embed);
    write_tensor(bin, w.class_token);
    for (const auto& l : w.layers) {
        write_tensor(bin, l.wq);
        write_tensor(bin, l.wk);
        write_tensor(bin, l.wv);
        write_tensor(bin, l.wo);
        write_tensor(bin, l.ln1_gamma);
        write_tensor(bin, l.ln1_beta);
        write_tensor(bin, l.w_hidden);
        write_tensor(bin, l.b_hidden);
        write_tensor(bin, l.w_out);
        write_tensor(bin, l.b_out);
        write_tensor(bin, l.ln2_gamma);
        write_tensor(bin, l.ln2_beta);
    }
    write_tensor(bin, w.final_gamma);
    write_tensor(bin, w.final_beta);

    std::ofstream man(manifest_path);
    man << "# name rows cols scale_shift offset\n";
    for (const auto& t : w.manifest())
        man << t.name << " " << t.rows << " " << t.cols << " " << t.scale_shift
            << " " << t.offset << "\n";
}

EncoderWeights load_weights(const ModelConfig& model, const HardwareConfig& hw,
                            const std::string& bin_path, const std::string& manifest_path) {
    EncoderWeights w = generate_weights(model, hw, 0);  // allocate shapes
    std::ifstream man(manifest_path);
    if (!man) throw std::runtime_error("cannot read " + manifest_path);
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + bin_path);
    read_tensor(bin, w.embed);
    read_tensor(bin, w.pos_embed);
    read_tensor(bin, w.class_token, size_t(model.model_dim));
    for (auto& l : w.layers) {
        read_tensor(bin, l.wq);
        read_tensor(bin, l.wk);
        read_tensor(bin, l.wv);
        read_tensor(bin, l.wo);
        read_tensor(bin, l.ln1_gamma, size_t(model.model_dim));
        read_tensor(bin, l.ln1_beta, size_t(model.model_dim));
        read_tensor(bin, l.w_hidden);
        read_tensor(bin, l.b_hidden, size_t(w.dims.hidden_dim));
        read_tensor(bin, l.w_out);
        read_tensor(bin, l.b_out, size_t(model.model_dim));
        read_tensor(bin, l.ln2_gamma, size_t(model.model_dim));
        read_tensor(bin, l.ln2_beta, size_t(model.model_dim));
    }
    read_tensor(bin, w.final_gamma, size_t(model.model_dim));
    read_tensor(bin, w.final_beta, size_t(model.model_dim));
    if (!bin) throw std::runtime_error("weight blob truncated: " + bin_path);
    return w;
}

}  // namespace mevit
