#include "attnshift/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace attnshift {

namespace {

constexpr double kNormEps = 1e-6;
constexpr double kInitStd = 0.02;
const double kGeluC = std::sqrt(2.0 / M_PI);

void fill_normal(Mat& m, std::mt19937_64& rng, double std_dev) {
    std::normal_distribution<double> dist(0.0, std_dev);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
}

// y = g (x) x / rms(x) rowwise; returns inv_rms per row for backward.
void rmsnorm_forward(const Mat& x, const Vec& g, Mat& y, Vec& inv_rms) {
    const auto n = x.rows();
    const auto d = x.cols();
    y.resize(n, d);
    inv_rms.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double ms = x.row(i).squaredNorm() / static_cast<double>(d) + kNormEps;
        double inv = 1.0 / std::sqrt(ms);
        inv_rms(i) = inv;
        y.row(i) = x.row(i).cwiseProduct(g.transpose()) * inv;
    }
}

void rmsnorm_backward(const Mat& x, const Vec& g, const Vec& inv_rms,
                      const Mat& dy, Mat& dx, Vec* dg) {
    const auto n = x.rows();
    const auto d = x.cols();
    dx.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        double inv = inv_rms(i);
        // s = sum_j g_j dy_j x_j
        double s = dy.row(i).cwiseProduct(g.transpose()).dot(x.row(i));
        dx.row(i) = dy.row(i).cwiseProduct(g.transpose()) * inv -
                    x.row(i) * (s * inv * inv * inv / static_cast<double>(d));
        if (dg) dg->noalias() += (dy.row(i).cwiseProduct(x.row(i)) * inv).transpose();
    }
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
    double inner = kGeluC * (x + 0.044715 * x * x * x);
    double t = std::tanh(inner);
    double dinner = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner;
}

// Applies the low-rank delta of one site. The exactly-zero up matrix is a
// no-op and is skipped, keeping zero-initialized adapters bit-identical to
// the plain projection.
void apply_adapter(const AdapterBank& adapters, int layer, int site,
                   const Mat& input, Mat& proj, Mat& mid) {
    if (!adapters.enabled || !adapters.active(layer, site)) return;
    const Adapter& ad = adapters.layers[static_cast<size_t>(layer)][static_cast<size_t>(site)];
    mid.noalias() = input * ad.down.transpose();  // n x rank
    if (!ad.up.isZero(0.0)) proj.noalias() += mid * ad.up.transpose();
}

void check_sequence(const ModelConfig& cfg, const TokenSequence& x) {
    if (x.length() < 1) throw std::invalid_argument("empty sequence");
    if (x.length() > cfg.max_seq)
        throw std::invalid_argument("sequence too long: " + std::to_string(x.length()) +
                                    " > max_seq " + std::to_string(cfg.max_seq));
    for (TokenId id : x.ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw std::invalid_argument("token id out of vocabulary range");
}

}  // namespace

const char* site_name(int site_index) {
    static const char* names[kNumSites] = {"q", "k", "v", "o"};
    return names[site_index];
}

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || vocab_size < 1 || max_seq < 1)
        throw std::invalid_argument("model dimensions must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("d_model must be divisible by n_heads");
    if (adapter_rank < 1) throw std::invalid_argument("adapter_rank must be >= 1");
}

Parameters init_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Parameters p;
    p.cfg = cfg;
    std::mt19937_64 rng(seed);
    p.embedding.resize(cfg.vocab_size, cfg.d_model);
    fill_normal(p.embedding, rng, kInitStd);
    p.pos.resize(cfg.max_seq, cfg.d_model);
    fill_normal(p.pos, rng, kInitStd);
    p.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& l : p.layers) {
        l.wq.resize(cfg.d_model, cfg.d_model);
        l.wk.resize(cfg.d_model, cfg.d_model);
        l.wv.resize(cfg.d_model, cfg.d_model);
        l.wo.resize(cfg.d_model, cfg.d_model);
        fill_normal(l.wq, rng, kInitStd);
        fill_normal(l.wk, rng, kInitStd);
        fill_normal(l.wv, rng, kInitStd);
        fill_normal(l.wo, rng, kInitStd);
        l.g1 = Vec::Ones(cfg.d_model);
        l.w1.resize(cfg.d_ff(), cfg.d_model);
        l.w2.resize(cfg.d_model, cfg.d_ff());
        fill_normal(l.w1, rng, kInitStd);
        fill_normal(l.w2, rng, kInitStd);
        l.g2 = Vec::Ones(cfg.d_model);
    }
    p.gf = Vec::Ones(cfg.d_model);
    p.w_head.resize(cfg.vocab_size, cfg.d_model);
    fill_normal(p.w_head, rng, kInitStd);
    p.b_head = Vec::Zero(cfg.vocab_size);
    return p;
}

AdapterBank init_adapters(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    AdapterBank a;
    a.enabled = true;
    a.rank = cfg.adapter_rank;
    a.sites = cfg.adapter_sites;
    a.layers.resize(static_cast<size_t>(cfg.n_layers));
    std::mt19937_64 rng(seed);
    for (auto& layer : a.layers) {
        for (int s = 0; s < kNumSites; ++s) {
            if (!cfg.site_active(s)) continue;
            Adapter& ad = layer[static_cast<size_t>(s)];
            ad.down.resize(cfg.adapter_rank, cfg.d_model);
            fill_normal(ad.down, rng, kInitStd);
            ad.up = Mat::Zero(cfg.d_model, cfg.adapter_rank);
        }
    }
    return a;
}

Parameters zeros_like(const Parameters& p) {
    Parameters z = p;
    z.embedding.setZero();
    z.pos.setZero();
    for (auto& l : z.layers) {
        l.wq.setZero();
        l.wk.setZero();
        l.wv.setZero();
        l.wo.setZero();
        l.g1.setZero();
        l.g2.setZero();
        l.w1.setZero();
        l.w2.setZero();
    }
    z.gf.setZero();
    z.w_head.setZero();
    z.b_head.setZero();
    return z;
}

AdapterBank zeros_like(const AdapterBank& a) {
    AdapterBank z = a;
    for (auto& layer : z.layers)
        for (auto& ad : layer) {
            ad.down.setZero();
            ad.up.setZero();
        }
    return z;
}

ForwardCache forward_cached(const Parameters& params, const AdapterBank& adapters,
                            const TokenSequence& x) {
    const ModelConfig& cfg = params.cfg;
    check_sequence(cfg, x);
    const int n = x.length();
    const int d = cfg.d_model;
    const int hd = cfg.d_head();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    ForwardCache c;
    c.x = x;
    c.adapters_applied = adapters.enabled;
    c.x0.resize(n, d);
    for (int t = 0; t < n; ++t)
        c.x0.row(t) = params.embedding.row(x.ids[static_cast<size_t>(t)]) + params.pos.row(t);

    Mat cur = c.x0;
    c.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerCache& lc = c.layers[static_cast<size_t>(l)];
        const LayerParams& lp = params.layers[static_cast<size_t>(l)];
        lc.x_in = cur;
        rmsnorm_forward(lc.x_in, lp.g1, lc.n1, lc.inv_rms1);

        lc.q.noalias() = lc.n1 * lp.wq.transpose();
        lc.k.noalias() = lc.n1 * lp.wk.transpose();
        lc.v.noalias() = lc.n1 * lp.wv.transpose();
        apply_adapter(adapters, l, 0, lc.n1, lc.q, lc.adapter_mid[0]);
        apply_adapter(adapters, l, 1, lc.n1, lc.k, lc.adapter_mid[1]);
        apply_adapter(adapters, l, 2, lc.n1, lc.v, lc.adapter_mid[2]);

        lc.att.assign(static_cast<size_t>(cfg.n_heads), Mat());
        lc.att_concat = Mat::Zero(n, d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            auto qh = lc.q.middleCols(h * hd, hd);
            auto kh = lc.k.middleCols(h * hd, hd);
            auto vh = lc.v.middleCols(h * hd, hd);
            Mat& p = lc.att[static_cast<size_t>(h)];
            p = Mat::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                // causal row: keys 0..i, softmax with max subtraction
                Eigen::VectorXd z = (kh.topRows(i + 1) * qh.row(i).transpose()) * scale;
                double m = z.maxCoeff();
                Eigen::VectorXd e = (z.array() - m).exp();
                p.row(i).head(i + 1) = (e / e.sum()).transpose();
            }
            lc.att_concat.middleCols(h * hd, hd).noalias() = p * vh;
        }

        Mat att_out;
        att_out.noalias() = lc.att_concat * lp.wo.transpose();
        apply_adapter(adapters, l, 3, lc.att_concat, att_out, lc.adapter_mid[3]);
        lc.x_mid = lc.x_in + att_out;

        rmsnorm_forward(lc.x_mid, lp.g2, lc.n2, lc.inv_rms2);
        lc.h_pre.noalias() = lc.n2 * lp.w1.transpose();
        lc.h_act = lc.h_pre.unaryExpr([](double v) { return gelu(v); });
        cur = lc.x_mid;
        cur.noalias() += lc.h_act * lp.w2.transpose();
    }

    c.xf = cur;
    rmsnorm_forward(c.xf, params.gf, c.nf, c.inv_rmsf);
    c.logits.noalias() = c.nf * params.w_head.transpose();
    c.logits.rowwise() += params.b_head.transpose();
    return c;
}

AttentionTensor attention_from_cache(const ForwardCache& cache, int n_layers,
                                     int n_heads) {
    AttentionTensor t;
    t.n_layers = n_layers;
    t.n_heads = n_heads;
    t.seq_len = cache.x.length();
    t.maps.reserve(static_cast<size_t>(n_layers * n_heads));
    for (int l = 0; l < n_layers; ++l)
        for (int h = 0; h < n_heads; ++h)
            t.maps.push_back(cache.layers[static_cast<size_t>(l)].att[static_cast<size_t>(h)]);
    return t;
}

ForwardTrace forward(const Parameters& params, const AdapterBank& adapters,
                     const TokenSequence& x) {
    ForwardCache cache = forward_cached(params, adapters, x);
    ForwardTrace tr;
    tr.logits = cache.logits;
    tr.attention = attention_from_cache(cache, params.cfg.n_layers, params.cfg.n_heads);
    tr.adapters_enabled = adapters.enabled;
    return tr;
}

double predictive_entropy(const Parameters& params, const AdapterBank& adapters,
                          const TokenSequence& x) {
    ForwardCache cache = forward_cached(params, adapters, x);
    const int n = x.length();
    int count = 0;
    double total = 0.0;
    for (int t = x.boundary; t < n - 1; ++t) {
        Eigen::VectorXd z = cache.logits.row(t).transpose();
        double m = z.maxCoeff();
        Eigen::VectorXd e = (z.array() - m).exp();
        double sum = e.sum();
        // H = log(sum) + m - dot(p, z); computed as -sum p log p
        Eigen::VectorXd p = e / sum;
        double h = 0.0;
        for (Eigen::Index v = 0; v < p.size(); ++v)
            if (p(v) > 0.0) h -= p(v) * std::log(p(v));
        total += h;
        ++count;
    }
    return count == 0 ? 0.0 : total / count;
}

TokenSequence generate(const Parameters& params, const AdapterBank& adapters,
                       const TokenSequence& prompt, int max_new) {
    check_sequence(params.cfg, prompt);
    TokenSequence out = prompt;
    for (int step = 0; step < max_new; ++step) {
        if (out.length() >= params.cfg.max_seq) break;
        ForwardCache cache = forward_cached(params, adapters, out);
        const auto row = cache.logits.row(out.length() - 1);
        TokenId best = 0;
        double best_v = row(0);
        for (Eigen::Index v = 1; v < row.size(); ++v)
            if (row(v) > best_v) {
                best_v = row(v);
                best = static_cast<TokenId>(v);
            }
        out.ids.push_back(best);
        if (best == kEos) break;
    }
    return out;
}

double cross_entropy_loss(const ForwardCache& cache, const TokenSequence& x,
                          Mat* dlogits, double weight) {
    const int n = x.length();
    const int count = n - 1 - x.boundary;
    if (count <= 0) {
        if (dlogits) dlogits->setZero(n, cache.logits.cols());
        return 0.0;
    }
    if (dlogits) dlogits->setZero(n, cache.logits.cols());
    double loss = 0.0;
    for (int t = x.boundary; t < n - 1; ++t) {
        Eigen::VectorXd z = cache.logits.row(t).transpose();
        double m = z.maxCoeff();
        Eigen::VectorXd e = (z.array() - m).exp();
        double sum = e.sum();
        TokenId target = x.ids[static_cast<size_t>(t + 1)];
        loss += std::log(sum) + m - z(target);
        if (dlogits) {
            Eigen::VectorXd p = e / sum;
            p(target) -= 1.0;
            dlogits->row(t) += (weight / count) * p.transpose();
        }
    }
    return loss / count;
}

void backward(const Parameters& params, const AdapterBank& adapters,
              const ForwardCache& cache, const LossSeed& seed,
              Parameters* base_grads, AdapterBank* adapter_grads) {
    const ModelConfig& cfg = params.cfg;
    const int n = cache.x.length();
    const int d = cfg.d_model;
    const int hd = cfg.d_head();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Mat dcur;  // gradient w.r.t. the residual stream
    if (seed.dlogits.size() > 0) {
        Mat dnf;
        dnf.noalias() = seed.dlogits * params.w_head;
        if (base_grads) {
            base_grads->w_head.noalias() += seed.dlogits.transpose() * cache.nf;
            base_grads->b_head.noalias() += seed.dlogits.colwise().sum().transpose();
        }
        rmsnorm_backward(cache.xf, params.gf, cache.inv_rmsf, dnf, dcur,
                         base_grads ? &base_grads->gf : nullptr);
    } else {
        dcur = Mat::Zero(n, d);
    }

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerCache& lc = cache.layers[static_cast<size_t>(l)];
        const LayerParams& lp = params.layers[static_cast<size_t>(l)];
        LayerParams* lg = base_grads ? &base_grads->layers[static_cast<size_t>(l)] : nullptr;

        // mlp block: cur = x_mid + gelu(n2 w1^T) w2^T
        Mat dh_act;
        dh_act.noalias() = dcur * lp.w2;
        if (lg) lg->w2.noalias() += dcur.transpose() * lc.h_act;
        Mat dh_pre = dh_act.binaryExpr(
            lc.h_pre, [](double g, double x) { return g * gelu_grad(x); });
        Mat dn2;
        dn2.noalias() = dh_pre * lp.w1;
        if (lg) lg->w1.noalias() += dh_pre.transpose() * lc.n2;
        Mat dx_mid;
        rmsnorm_backward(lc.x_mid, lp.g2, lc.inv_rms2, dn2, dx_mid,
                         lg ? &lg->g2 : nullptr);
        dx_mid += dcur;  // residual

        // attention output projection
        Mat dconcat;
        dconcat.noalias() = dx_mid * lp.wo;
        if (lg) lg->wo.noalias() += dx_mid.transpose() * lc.att_concat;
        Mat dn1 = Mat::Zero(n, d);
        if (adapters.enabled && adapters.active(l, 3)) {
            const Adapter& ad = adapters.layers[static_cast<size_t>(l)][3];
            Mat dmid;
            dmid.noalias() = dx_mid * ad.up;
            if (adapter_grads) {
                Adapter& ag = adapter_grads->layers[static_cast<size_t>(l)][3];
                ag.up.noalias() += dx_mid.transpose() * lc.adapter_mid[3];
                ag.down.noalias() += dmid.transpose() * lc.att_concat;
            }
            dconcat.noalias() += dmid * ad.down;
        }

        // per-head attention
        Mat dq = Mat::Zero(n, d), dk = Mat::Zero(n, d), dv = Mat::Zero(n, d);
        const bool has_datt = !seed.datt.empty();
        for (int h = 0; h < cfg.n_heads; ++h) {
            const Mat& p = lc.att[static_cast<size_t>(h)];
            auto qh = lc.q.middleCols(h * hd, hd);
            auto kh = lc.k.middleCols(h * hd, hd);
            auto vh = lc.v.middleCols(h * hd, hd);
            auto doh = dconcat.middleCols(h * hd, hd);

            Mat dp;
            dp.noalias() = doh * vh.transpose();
            if (has_datt) {
                const Mat& extra = seed.datt[static_cast<size_t>(l)][static_cast<size_t>(h)];
                if (extra.size() > 0) dp += extra;
            }
            dv.middleCols(h * hd, hd).noalias() += p.transpose() * doh;

            Mat dz = Mat::Zero(n, n);
            for (int i = 0; i < n; ++i) {
                auto pi = p.row(i).head(i + 1);
                auto dpi = dp.row(i).head(i + 1);
                double s = pi.dot(dpi);
                dz.row(i).head(i + 1) = pi.cwiseProduct(dpi.array().transpose().matrix() -
                                                        Eigen::RowVectorXd::Constant(i + 1, s));
            }
            dq.middleCols(h * hd, hd).noalias() += (dz * kh) * scale;
            dk.middleCols(h * hd, hd).noalias() += (dz.transpose() * qh) * scale;
        }

        // projections q/k/v with optional adapters
        const Mat* dprojs[3] = {&dq, &dk, &dv};
        const Mat* weights[3] = {&lp.wq, &lp.wk, &lp.wv};
        Mat* wgrads[3] = {lg ? &lg->wq : nullptr, lg ? &lg->wk : nullptr,
                          lg ? &lg->wv : nullptr};
        for (int s = 0; s < 3; ++s) {
            dn1.noalias() += *dprojs[s] * *weights[s];
            if (wgrads[s]) wgrads[s]->noalias() += dprojs[s]->transpose() * lc.n1;
            if (adapters.enabled && adapters.active(l, s)) {
                const Adapter& ad = adapters.layers[static_cast<size_t>(l)][static_cast<size_t>(s)];
                Mat dmid;
                dmid.noalias() = *dprojs[s] * ad.up;
                if (adapter_grads) {
                    Adapter& ag = adapter_grads->layers[static_cast<size_t>(l)][static_cast<size_t>(s)];
                    ag.up.noalias() += dprojs[s]->transpose() * lc.adapter_mid[static_cast<size_t>(s)];
                    ag.down.noalias() += dmid.transpose() * lc.n1;
                }
                dn1.noalias() += dmid * ad.down;
            }
        }

        Mat dx_in;
        rmsnorm_backward(lc.x_in, lp.g1, lc.inv_rms1, dn1, dx_in,
                         lg ? &lg->g1 : nullptr);
        dcur = dx_mid + dx_in;
    }

    if (base_grads) {
        for (int t = 0; t < n; ++t) {
            base_grads->embedding.row(cache.x.ids[static_cast<size_t>(t)]) += dcur.row(t);
            base_grads->pos.row(t) += dcur.row(t);
        }
    }
}

std::vector<TensorRef> tensor_refs(Parameters& p) {
    std::vector<TensorRef> out;
    auto add = [&out](const std::string& name, double* data, std::ptrdiff_t size) {
        out.push_back({name, data, size});
    };
    add("emb", p.embedding.data(), p.embedding.size());
    add("pos", p.pos.data(), p.pos.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
        auto& lp = p.layers[l];
        std::string pre = "layer" + std::to_string(l) + ".";
        add(pre + "wq", lp.wq.data(), lp.wq.size());
        add(pre + "wk", lp.wk.data(), lp.wk.size());
        add(pre + "wv", lp.wv.data(), lp.wv.size());
        add(pre + "wo", lp.wo.data(), lp.wo.size());
        add(pre + "g1", lp.g1.data(), lp.g1.size());
        add(pre + "w1", lp.w1.data(), lp.w1.size());
        add(pre + "w2", lp.w2.data(), lp.w2.size());
        add(pre + "g2", lp.g2.data(), lp.g2.size());
    }
    add("gf", p.gf.data(), p.gf.size());
    add("head.w", p.w_head.data(), p.w_head.size());
    add("head.b", p.b_head.data(), p.b_head.size());
    return out;
}

std::vector<TensorRef> tensor_refs(AdapterBank& a) {
    std::vector<TensorRef> out;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        for (int s = 0; s < kNumSites; ++s) {
            if (!(a.sites & (1u << s))) continue;
            Adapter& ad = a.layers[l][static_cast<size_t>(s)];
            std::string pre =
                "adapter.l" + std::to_string(l) + "." + site_name(s) + ".";
            out.push_back({pre + "down", ad.down.data(), ad.down.size()});
            out.push_back({pre + "up", ad.up.data(), ad.up.size()});
        }
    }
    return out;
}

// ----------------------------------------------------------------------
// Checkpoint io
// ----------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'A', 'S', 'H', 'I', 'F', 'T', '0', '1'};

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    uint32_t len = read_pod<uint32_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw std::runtime_error("checkpoint truncated");
    return s;
}

void write_array(std::ostream& os, const std::string& name, const double* data,
                 uint64_t rows, uint64_t cols) {
    write_string(os, name);
    write_pod(os, rows);
    write_pod(os, cols);
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(rows * cols * sizeof(double)));
}

void read_array_into(std::istream& is, const std::string& want, double* data,
                     uint64_t rows, uint64_t cols) {
    std::string name = read_string(is);
    if (name != want)
        throw std::runtime_error("checkpoint array mismatch: expected " + want +
                                 ", found " + name);
    uint64_t r = read_pod<uint64_t>(is);
    uint64_t c = read_pod<uint64_t>(is);
    if (r != rows || c != cols)
        throw std::runtime_error("checkpoint array shape mismatch for " + want);
    is.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint truncated in array " + want);
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod<uint32_t>(os, 1);
    const ModelConfig& cfg = ck.params.cfg;
    write_pod<int32_t>(os, cfg.n_layers);
    write_pod<int32_t>(os, cfg.n_heads);
    write_pod<int32_t>(os, cfg.d_model);
    write_pod<int32_t>(os, cfg.vocab_size);
    write_pod<int32_t>(os, cfg.max_seq);
    write_pod<int32_t>(os, cfg.adapter_rank);
    write_pod<uint32_t>(os, cfg.adapter_sites);
    write_pod<uint64_t>(os, ck.corpus_hash);
    write_pod<uint64_t>(os, ck.epoch);
    write_pod<uint8_t>(os, ck.adapters.enabled ? 1 : 0);
    write_string(os, ck.rng_state);

    auto& params = const_cast<Parameters&>(ck.params);
    auto& adapters = const_cast<AdapterBank&>(ck.adapters);
    auto base = tensor_refs(params);
    auto adpt = tensor_refs(adapters);
    write_pod<uint32_t>(os, static_cast<uint32_t>(base.size() + adpt.size()));
    for (const auto& t : base)
        write_array(os, t.name, t.data, static_cast<uint64_t>(t.size), 1);
    for (const auto& t : adpt)
        write_array(os, t.name, t.data, static_cast<uint64_t>(t.size), 1);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not an attnshift checkpoint: " + path);
    uint32_t version = read_pod<uint32_t>(is);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version");
    ModelConfig cfg;
    cfg.n_layers = read_pod<int32_t>(is);
    cfg.n_heads = read_pod<int32_t>(is);
    cfg.d_model = read_pod<int32_t>(is);
    cfg.vocab_size = read_pod<int32_t>(is);
    cfg.max_seq = read_pod<int32_t>(is);
    cfg.adapter_rank = read_pod<int32_t>(is);
    cfg.adapter_sites = read_pod<uint32_t>(is);
    cfg.validate();

    Checkpoint ck;
    ck.corpus_hash = read_pod<uint64_t>(is);
    ck.epoch = read_pod<uint64_t>(is);
    uint8_t enabled = read_pod<uint8_t>(is);
    ck.rng_state = read_string(is);

    ck.params = init_model(cfg, 0);  // shapes only; data overwritten below
    ck.adapters = init_adapters(cfg, 0);
    ck.adapters.enabled = enabled != 0;

    auto base = tensor_refs(ck.params);
    auto adpt = tensor_refs(ck.adapters);
    uint32_t n_arrays = read_pod<uint32_t>(is);
    if (n_arrays != base.size() + adpt.size())
        throw std::runtime_error("checkpoint array count mismatch");
    for (auto& t : base)
        read_array_into(is, t.name, t.data, static_cast<uint64_t>(t.size), 1);
    for (auto& t : adpt)
        read_array_into(is, t.name, t.data, static_cast<uint64_t>(t.size), 1);
    return ck;
}

}  // namespace attnshift
