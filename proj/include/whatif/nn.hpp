#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "whatif/rng.hpp"
#include "whatif/scene.hpp"
#include "whatif/tensor_codec.hpp"

namespace whatif {
namespace nn {

// 64-bit floats throughout: desk scale makes speed a non-issue and keeps
// finite-difference checks crisp.

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct Param {
    std::string name;
    std::vector<int> shape;  // rank <= 3
    std::vector<double> w;   // values
    std::vector<double> g;   // gradient accumulator
    std::vector<double> m;   // first moment
    std::vector<double> v;   // second moment
    bool frozen = false;

    std::size_t size() const { return w.size(); }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }
};

class ParamStore {
public:
    Param& add(const std::string& name, std::vector<int> shape) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        Param p;
        p.name = name;
        p.shape = std::move(shape);
        p.w.assign(n, 0.0);
        p.g.assign(n, 0.0);
        p.m.assign(n, 0.0);
        p.v.assign(n, 0.0);
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return params_.back();
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Param& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter " + name);
        return params_[it->second];
    }
    const Param& at(const std::string& name) const { return const_cast<ParamStore*>(this)->at(name); }

    std::deque<Param>& params() { return params_; }
    const std::deque<Param>& params() const { return params_; }

    void zero_grads() {
        for (auto& p : params_) std::fill(p.g.begin(), p.g.end(), 0.0);
    }

    void freeze_all(bool frozen) {
        for (auto& p : params_) p.frozen = frozen;
    }

    std::int64_t step() const { return step_; }

    // Standard adaptive-moment update with bias correction. Frozen
    // parameters are untouched, moments included.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& p : params_) {
            if (p.frozen) continue;
            for (std::size_t i = 0; i < p.w.size(); ++i) {
                const double g = p.g[i];
                p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
                p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
                p.w[i] -= lr * (p.m[i] / bc1) / (std::sqrt(p.v[i] / bc2) + eps);
            }
        }
    }

    bool values_equal(const ParamStore& other) const {
        if (params_.size() != other.params_.size()) return false;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].name != other.params_[i].name) return false;
            if (params_[i].w != other.params_[i].w) return false;
        }
        return true;
    }

    // ---- checkpoint container: versioned binary of names, shapes, values ----

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        const char magic[8] = {'W', 'F', 'C', 'K', 'P', 'T', '0', '1'};
        f.write(magic, 8);
        write_u64(f, static_cast<std::uint64_t>(step_));
        write_u64(f, params_.size());
        for (const auto& p : params_) {
            write_u64(f, p.name.size());
            f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
            write_u64(f, p.shape.size());
            for (int d : p.shape) write_u64(f, static_cast<std::uint64_t>(d));
            f.put(p.frozen ? 1 : 0);
            f.write(reinterpret_cast<const char*>(p.w.data()), static_cast<std::streamsize>(p.w.size() * 8));
        }
        if (!f) throw std::runtime_error("write failed: " + path);
    }

    static ParamStore load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot read " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, "WFCKPT01", 8) != 0) throw std::runtime_error(path + ": not a checkpoint");
        ParamStore store;
        store.step_ = static_cast<std::int64_t>(read_u64(f));
        const std::uint64_t count = read_u64(f);
        for (std::uint64_t i = 0; i < count; ++i) {
            std::string name(read_u64(f), '\0');
            f.read(name.data(), static_cast<std::streamsize>(name.size()));
            std::vector<int> shape(read_u64(f));
            for (auto& d : shape) d = static_cast<int>(read_u64(f));
            const bool frozen = f.get() == 1;
            Param& p = store.add(name, shape);
            p.frozen = frozen;
            f.read(reinterpret_cast<char*>(p.w.data()), static_cast<std::streamsize>(p.w.size() * 8));
        }
        if (!f) throw std::runtime_error(path + ": truncated checkpoint");
        return store;
    }

private:
    static void write_u64(std::ofstream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }
    static std::uint64_t read_u64(std::ifstream& f) {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    }

    std::deque<Param> params_;  // stable references under add()
    std::map<std::string, std::size_t> index_;
    std::int64_t step_ = 0;
};

inline void init_glorot(Param& p, Rng& rng) {
    const double a = std::sqrt(6.0 / (p.rows() + p.cols()));
    for (auto& w : p.w) w = rng.uniform(-a, a);
}

inline void init_normal(Param& p, Rng& rng, double stddev) {
    for (auto& w : p.w) w = rng.normal(0.0, stddev);
}

// ---------------------------------------------------------------------------
// Matrix kernels, row-major. Loops ordered so inner dimensions stream.
// ---------------------------------------------------------------------------

// C[m x n] (+)= A[m x k] . B[k x n]
inline void matmul(const double* A, const double* B, double* C, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        double* c = C + static_cast<std::size_t>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) c[j] = 0.0;
        const double* a = A + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double ap = a[p];
            if (ap == 0.0) continue;
            const double* b = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += ap * b[j];
        }
    }
}

// C[k x n] += A^T . B  with A[m x k], B[m x n]   (weight gradients)
inline void matmul_at_b(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * k;
        const double* b = B + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double ap = a[p];
            if (ap == 0.0) continue;
            double* c = C + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += ap * b[j];
        }
    }
}

// C[m x k] += A . B^T  with A[m x n], B[k x n]   (input gradients)
inline void matmul_a_bt(const double* A, const double* B, double* C, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * n;
        double* c = C + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* b = B + static_cast<std::size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += a[j] * b[j];
            c[p] += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

// y[B x out] = x[B x in] . W[in x out] + b
inline void dense_forward(const double* x, const Param& W, const Param& b, double* y, int B) {
    const int in = W.rows(), out = W.cols();
    matmul(x, W.w.data(), y, B, in, out, false);
    for (int i = 0; i < B; ++i) {
        double* yi = y + static_cast<std::size_t>(i) * out;
        for (int j = 0; j < out; ++j) yi[j] += b.w[static_cast<std::size_t>(j)];
    }
}

// accumulates parameter grads; writes (not accumulates) dx when given
inline void dense_backward(const double* x, const double* dy, Param& W, Param& b, double* dx, int B) {
    const int in = W.rows(), out = W.cols();
    matmul_at_b(x, dy, W.g.data(), B, in, out);
    for (int i = 0; i < B; ++i) {
        const double* d = dy + static_cast<std::size_t>(i) * out;
        for (int j = 0; j < out; ++j) b.g[static_cast<std::size_t>(j)] += d[j];
    }
    if (dx) {
        std::fill(dx, dx + static_cast<std::size_t>(B) * in, 0.0);
        matmul_a_bt(dy, W.w.data(), dx, B, out, in);
    }
}

inline void relu_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] < 0.0) x[i] = 0.0;
}

// dpre = dpost where post > 0, else 0 (post is the rectified activation)
inline void relu_backward_inplace(const double* post, double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (post[i] <= 0.0) d[i] = 0.0;
}

// Fully-connected stack: ReLU on hidden layers, linear output. Optionally
// carries a linear input->output skip (out += x . S); the skip matrix is
// zero unless the model builder seeds it.
struct Mlp {
    std::string prefix;
    std::vector<int> dims;  // {in, hidden..., out}
    bool with_skip = false;

    struct Cache {
        int B = 0;
        std::vector<std::vector<double>> acts;  // acts[0] = input copy, acts[i] = layer i output
    };

    void init(ParamStore& store, Rng& rng) const {
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            Param& W = store.add(weight_name(l), {dims[l], dims[l + 1]});
            init_glorot(W, rng);
            store.add(bias_name(l), {1, dims[l + 1]});
        }
        if (with_skip) store.add(skip_name(), {dims.front(), dims.back()});
    }

    std::string skip_name() const { return prefix + ".S"; }

    std::string weight_name(std::size_t l) const { return prefix + ".W" + std::to_string(l); }
    std::string bias_name(std::size_t l) const { return prefix + ".b" + std::to_string(l); }

    int in_dim() const { return dims.front(); }
    int out_dim() const { return dims.back(); }

    void forward(const ParamStore& store, const double* x, int B, Cache& cache, double* y) const {
        const std::size_t L = dims.size() - 1;
        cache.B = B;
        cache.acts.assign(L + 1, {});
        cache.acts[0].assign(x, x + static_cast<std::size_t>(B) * dims[0]);
        for (std::size_t l = 0; l < L; ++l) {
            cache.acts[l + 1].assign(static_cast<std::size_t>(B) * dims[l + 1], 0.0);
            dense_forward(cache.acts[l].data(), store.at(weight_name(l)), store.at(bias_name(l)),
                          cache.acts[l + 1].data(), B);
            if (l + 1 < L) relu_inplace(cache.acts[l + 1].data(), cache.acts[l + 1].size());
        }
        std::copy(cache.acts[L].begin(), cache.acts[L].end(), y);
        if (with_skip)
            matmul(x, store.at(skip_name()).w.data(), y, B, dims.front(), dims.back(), true);
    }

    // dy [B x out] -> parameter grads (accumulated); dx written when non-null
    void backward(ParamStore& store, const Cache& cache, const double* dy, double* dx) const {
        const std::size_t L = dims.size() - 1;
        const int B = cache.B;
        std::vector<double> d(dy, dy + static_cast<std::size_t>(B) * dims[L]);
        for (std::size_t l = L; l-- > 0;) {
            std::vector<double> dprev;
            double* dprev_ptr = nullptr;
            if (l > 0) {
                dprev.assign(static_cast<std::size_t>(B) * dims[l], 0.0);
                dprev_ptr = dprev.data();
            } else {
                dprev_ptr = dx;  // may be null
            }
            dense_backward(cache.acts[l].data(), d.data(), store.at(weight_name(l)), store.at(bias_name(l)),
                           dprev_ptr, B);
            if (l > 0) {
                relu_backward_inplace(cache.acts[l].data(), dprev.data(), dprev.size());
                d = std::move(dprev);
            }
        }
        if (with_skip) {
            Param& S = store.at(skip_name());
            matmul_at_b(cache.acts[0].data(), dy, S.g.data(), B, dims.front(), dims.back());
            if (dx) matmul_a_bt(dy, S.w.data(), dx, B, dims.back(), dims.front());
        }
    }
};

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

// out[B x T x D] = E[ids]; PAD rows are zero-initialized and, being masked
// downstream, receive no gradient.
inline void embedding_forward(const Param& E, std::span<const int> ids, double* out, int B, int T) {
    const int D = E.cols();
    const int V = E.rows();
    for (int i = 0; i < B * T; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= V) throw std::out_of_range("token id " + std::to_string(id));
        std::copy_n(E.w.data() + static_cast<std::size_t>(id) * D, D, out + static_cast<std::size_t>(i) * D);
    }
}

inline void embedding_backward(Param& E, std::span<const int> ids, const double* dout, int B, int T) {
    const int D = E.cols();
    for (int i = 0; i < B * T; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        double* g = E.g.data() + static_cast<std::size_t>(id) * D;
        const double* d = dout + static_cast<std::size_t>(i) * D;
        for (int j = 0; j < D; ++j) g[j] += d[j];
    }
}

// ---------------------------------------------------------------------------
// LSTM sequence encoder (standard gate equations, PAD positions masked
// through). Returns the final hidden state.
// ---------------------------------------------------------------------------

struct Lstm {
    std::string prefix;
    int in = 0;
    int hidden = 0;

    // gate packing along the 4H axis: [input, forget, cell, output]
    void init(ParamStore& store, Rng& rng) const {
        Param& Wx = store.add(prefix + ".Wx", {in, 4 * hidden});
        init_glorot(Wx, rng);
        Param& Wh = store.add(prefix + ".Wh", {hidden, 4 * hidden});
        init_glorot(Wh, rng);
        Param& b = store.add(prefix + ".b", {1, 4 * hidden});
        for (int j = 0; j < hidden; ++j) b.w[static_cast<std::size_t>(hidden + j)] = 1.0;  // forget gate bias
    }

    struct Cache {
        int B = 0, T = 0;
        std::vector<double> x;                      // B x T x in (copy)
        std::vector<double> mask;                   // B x T
        std::vector<std::vector<double>> gates;     // per step: B x 4H, post-nonlinearity
        std::vector<std::vector<double>> c, h;      // per step: B x H (post-mask)
        std::vector<std::vector<double>> tanh_c;    // per step: B x H
    };

    static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

    // x: B x T x in, mask: B x T in {0,1}; h_final: B x hidden
    void forward(const ParamStore& store, const double* x, const double* mask, int B, int T, Cache& cache,
                 double* h_final) const {
        const Param& Wx = store.at(prefix + ".Wx");
        const Param& Wh = store.at(prefix + ".Wh");
        const Param& b = store.at(prefix + ".b");
        const int H = hidden;

        cache.B = B;
        cache.T = T;
        cache.x.assign(x, x + static_cast<std::size_t>(B) * T * in);
        cache.mask.assign(mask, mask + static_cast<std::size_t>(B) * T);
        cache.gates.assign(static_cast<std::size_t>(T), {});
        cache.c.assign(static_cast<std::size_t>(T), {});
        cache.h.assign(static_cast<std::size_t>(T), {});
        cache.tanh_c.assign(static_cast<std::size_t>(T), {});

        std::vector<double> h_prev(static_cast<std::size_t>(B) * H, 0.0);
        std::vector<double> c_prev(static_cast<std::size_t>(B) * H, 0.0);
        std::vector<double> xt(static_cast<std::size_t>(B) * in);
        std::vector<double> z(static_cast<std::size_t>(B) * 4 * H);

        for (int t = 0; t < T; ++t) {
            for (int i = 0; i < B; ++i)
                std::copy_n(x + (static_cast<std::size_t>(i) * T + t) * in, in, xt.data() + static_cast<std::size_t>(i) * in);
            matmul(xt.data(), Wx.w.data(), z.data(), B, in, 4 * H, false);
            matmul(h_prev.data(), Wh.w.data(), z.data(), B, H, 4 * H, true);
            auto& gates = cache.gates[static_cast<std::size_t>(t)];
            auto& ct = cache.c[static_cast<std::size_t>(t)];
            auto& ht = cache.h[static_cast<std::size_t>(t)];
            auto& tc = cache.tanh_c[static_cast<std::size_t>(t)];
            gates.assign(static_cast<std::size_t>(B) * 4 * H, 0.0);
            ct.assign(static_cast<std::size_t>(B) * H, 0.0);
            ht.assign(static_cast<std::size_t>(B) * H, 0.0);
            tc.assign(static_cast<std::size_t>(B) * H, 0.0);
            for (int i = 0; i < B; ++i) {
                const double m = mask[static_cast<std::size_t>(i) * T + t];
                const double* zi = z.data() + static_cast<std::size_t>(i) * 4 * H;
                double* gi = gates.data() + static_cast<std::size_t>(i) * 4 * H;
                for (int j = 0; j < H; ++j) {
                    const double ig = sigmoid(zi[j] + b.w[static_cast<std::size_t>(j)]);
                    const double fg = sigmoid(zi[H + j] + b.w[static_cast<std::size_t>(H + j)]);
                    const double gg = std::tanh(zi[2 * H + j] + b.w[static_cast<std::size_t>(2 * H + j)]);
                    const double og = sigmoid(zi[3 * H + j] + b.w[static_cast<std::size_t>(3 * H + j)]);
                    gi[j] = ig;
                    gi[H + j] = fg;
                    gi[2 * H + j] = gg;
                    gi[3 * H + j] = og;
                    const std::size_t k = static_cast<std::size_t>(i) * H + j;
                    const double c_new = fg * c_prev[k] + ig * gg;
                    const double c_t = m * c_new + (1.0 - m) * c_prev[k];
                    const double th = std::tanh(c_t);
                    const double h_t = m * (og * th) + (1.0 - m) * h_prev[k];
                    ct[k] = c_t;
                    tc[k] = th;
                    ht[k] = h_t;
                }
            }
            h_prev = ht;
            c_prev = ct;
        }
        std::copy(h_prev.begin(), h_prev.end(), h_final);
    }

    // dh_final: B x hidden; accumulates parameter grads; dx (B x T x in) written when non-null
    void backward(ParamStore& store, const Cache& cache, const double* dh_final, double* dx) const {
        Param& Wx = store.at(prefix + ".Wx");
        Param& Wh = store.at(prefix + ".Wh");
        Param& b = store.at(prefix + ".b");
        const int B = cache.B, T = cache.T, H = hidden;

        std::vector<double> dh(dh_final, dh_final + static_cast<std::size_t>(B) * H);
        std::vector<double> dc(static_cast<std::size_t>(B) * H, 0.0);
        std::vector<double> dz(static_cast<std::size_t>(B) * 4 * H);
        std::vector<double> xt(static_cast<std::size_t>(B) * in);
        std::vector<double> dxt(static_cast<std::size_t>(B) * in, 0.0);
        std::vector<double> hp(static_cast<std::size_t>(B) * H);
        if (dx) std::fill(dx, dx + static_cast<std::size_t>(B) * T * in, 0.0);

        for (int t = T - 1; t >= 0; --t) {
            const auto& gates = cache.gates[static_cast<std::size_t>(t)];
            const auto& tc = cache.tanh_c[static_cast<std::size_t>(t)];
            // previous step state (zeros at t = 0)
            const std::vector<double>* c_prev = (t > 0) ? &cache.c[static_cast<std::size_t>(t - 1)] : nullptr;
            const std::vector<double>* h_prev = (t > 0) ? &cache.h[static_cast<std::size_t>(t - 1)] : nullptr;

            for (int i = 0; i < B; ++i) {
                const double m = cache.mask[static_cast<std::size_t>(i) * T + t];
                const double* gi = gates.data() + static_cast<std::size_t>(i) * 4 * H;
                double* dzi = dz.data() + static_cast<std::size_t>(i) * 4 * H;
                for (int j = 0; j < H; ++j) {
                    const std::size_t k = static_cast<std::size_t>(i) * H + j;
                    const double cp = c_prev ? (*c_prev)[k] : 0.0;
                    const double ig = gi[j], fg = gi[H + j], gg = gi[2 * H + j], og = gi[3 * H + j];
                    // h_t = m*(o*tanh(c_t)) + (1-m)*h_{t-1};  c_t = m*c_new + (1-m)*c_{t-1}
                    const double dh_m = dh[k] * m;
                    const double do_ = dh_m * tc[k];
                    double dct = dh_m * og * (1.0 - tc[k] * tc[k]) + dc[k];
                    const double dc_new = dct * m;
                    const double df = dc_new * cp;
                    const double di = dc_new * gg;
                    const double dg = dc_new * ig;
                    // pass-through parts
                    dh[k] = dh[k] * (1.0 - m);
                    dc[k] = dct * (1.0 - m) + dc_new * fg;
                    dzi[j] = di * ig * (1.0 - ig);
                    dzi[H + j] = df * fg * (1.0 - fg);
                    dzi[2 * H + j] = dg * (1.0 - gg * gg);
                    dzi[3 * H + j] = do_ * og * (1.0 - og);
                }
            }

            for (int i = 0; i < B; ++i)
                std::copy_n(cache.x.data() + (static_cast<std::size_t>(i) * T + t) * in, in,
                            xt.data() + static_cast<std::size_t>(i) * in);
            matmul_at_b(xt.data(), dz.data(), Wx.g.data(), B, in, 4 * H);
            if (t > 0) {
                matmul_at_b(h_prev->data(), dz.data(), Wh.g.data(), B, H, 4 * H);
            }
            for (int i = 0; i < B; ++i) {
                const double* d = dz.data() + static_cast<std::size_t>(i) * 4 * H;
                for (int j = 0; j < 4 * H; ++j) b.g[static_cast<std::size_t>(j)] += d[j];
            }
            if (dx) {
                std::fill(dxt.begin(), dxt.end(), 0.0);
                matmul_a_bt(dz.data(), Wx.w.data(), dxt.data(), B, 4 * H, in);
                for (int i = 0; i < B; ++i)
                    for (int j = 0; j < in; ++j)
                        dx[(static_cast<std::size_t>(i) * T + t) * in + j] += dxt[static_cast<std::size_t>(i) * in + j];
            }
            // dh_{t-1} += dz . Wh^T
            if (t > 0) {
                hp.assign(static_cast<std::size_t>(B) * H, 0.0);
                matmul_a_bt(dz.data(), Wh.w.data(), hp.data(), B, 4 * H, H);
                for (std::size_t k = 0; k < dh.size(); ++k) dh[k] += hp[k];
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// -log softmax(logits)[target]; gradient accumulated into dlogits when given
inline double softmax_ce(const double* logits, int k, int target, double* dlogits, double scale = 1.0) {
    double mx = logits[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += std::exp(logits[i] - mx);
    const double loss = std::log(sum) - (logits[target] - mx);
    if (dlogits) {
        for (int i = 0; i < k; ++i) {
            const double p = std::exp(logits[i] - mx) / sum;
            dlogits[i] += scale * (p - (i == target ? 1.0 : 0.0));
        }
    }
    return loss;
}

// numerically stable binary cross entropy on a pre-sigmoid score
inline double bce_logit(double z, double target, double* dz, double scale = 1.0) {
    const double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    if (dz) *dz += scale * (1.0 / (1.0 + std::exp(-z)) - target);
    return loss;
}

inline double mse(double pred, double target, double* dpred, double scale = 1.0) {
    const double d = pred - target;
    if (dpred) *dpred += scale * 2.0 * d;
    return d * d;
}

// Factorized scene reconstruction loss against a target scene-graph:
// Bernoulli existence per slot, categorical terms per attribute group and
// support, squared error on coordinates (terms masked on slots empty in the
// target).
inline double scene_loss(const double* logits, const SceneGraph& target, double lambda_coord, double* dlogits,
                         double scale = 1.0) {
    const SceneTensorLayout L{target.capacity()};
    double total = 0.0;
    for (int s = 0; s < L.n_max; ++s) {
        const double* b = logits + L.slot_offset(s);
        double* db = dlogits ? dlogits + L.slot_offset(s) : nullptr;
        const bool occ = target.occupied(s);
        total += bce_logit(b[SceneTensorLayout::kExist], occ ? 1.0 : 0.0,
                           db ? db + SceneTensorLayout::kExist : nullptr, scale);
        if (!occ) continue;
        const ObjectNode& o = target.object(s);
        total += softmax_ce(b + SceneTensorLayout::kColor, kNumColors, static_cast<int>(o.color),
                            db ? db + SceneTensorLayout::kColor : nullptr, scale);
        total += softmax_ce(b + SceneTensorLayout::kShape, kNumShapes, static_cast<int>(o.shape),
                            db ? db + SceneTensorLayout::kShape : nullptr, scale);
        total += softmax_ce(b + SceneTensorLayout::kSize, kNumSizes, static_cast<int>(o.size),
                            db ? db + SceneTensorLayout::kSize : nullptr, scale);
        total += softmax_ce(b + SceneTensorLayout::kMaterial, kNumMaterials, static_cast<int>(o.material),
                            db ? db + SceneTensorLayout::kMaterial : nullptr, scale);
        total += softmax_ce(b + SceneTensorLayout::kSupport, L.n_max + 1,
                            o.support == kGround ? 0 : o.support + 1,
                            db ? db + SceneTensorLayout::kSupport : nullptr, scale);
        total += lambda_coord * mse(b[SceneTensorLayout::kCoord + 0], o.x,
                                    db ? db + SceneTensorLayout::kCoord + 0 : nullptr, scale * lambda_coord);
        total += lambda_coord * mse(b[SceneTensorLayout::kCoord + 1], o.y,
                                    db ? db + SceneTensorLayout::kCoord + 1 : nullptr, scale * lambda_coord);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

// Central finite differences against analytic gradients. `loss_and_grad`
// zeroes grads, runs forward+backward and returns the loss; `loss_only`
// runs forward alone. Samples >= `samples` coordinates per parameter tensor
// (every coordinate for small tensors). Returns the max relative error with
// denominator floor 1e-3.
inline double grad_check(ParamStore& store, const std::function<double()>& loss_and_grad,
                         const std::function<double()>& loss_only, double h = 1e-4, int samples = 50,
                         std::uint64_t seed = 17) {
    Rng rng(seed);
    loss_and_grad();
    double worst = 0.0;
    for (auto& p : store.params()) {
        const std::size_t n = p.w.size();
        std::vector<std::size_t> coords;
        if (n <= static_cast<std::size_t>(samples)) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < samples; ++i) coords.push_back(static_cast<std::size_t>(rng.below(n)));
        }
        for (std::size_t idx : coords) {
            const double keep = p.w[idx];
            p.w[idx] = keep + h;
            const double lp = loss_only();
            p.w[idx] = keep - h;
            const double lm = loss_only();
            p.w[idx] = keep;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = p.g[idx];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace nn
}  // namespace whatif
