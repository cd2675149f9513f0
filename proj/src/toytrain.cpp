#include "osfuse/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "osfuse/errors.hpp"

namespace osf::toy {

using num::Tensor;
using num::Var;

std::string ToyConfig::name() const {
    std::ostringstream os;
    os << "filter=" << filters::to_string(filter) << " scan=" << scan::to_string(cmim.kind)
       << " seed=" << seed;
    return os.str();
}

namespace {

std::size_t patch_size_for_level(int level) {
    return static_cast<std::size_t>(1) << level;  // 8, 16, 32
}

// brings the pooled feature magnitudes to O(1) so the fixed optimizer
// settings bite; identical for every model
constexpr double kPoolGain = 4.0;

// flat pixel indices grouped patch by patch, row-major within each patch
std::vector<std::size_t> patch_order(std::size_t image, std::size_t patch) {
    std::vector<std::size_t> idx;
    idx.reserve(image * image);
    const std::size_t grid = image / patch;
    for (std::size_t gr = 0; gr < grid; ++gr)
        for (std::size_t gc = 0; gc < grid; ++gc)
            for (std::size_t py = 0; py < patch; ++py)
                for (std::size_t px = 0; px < patch; ++px)
                    idx.push_back((gr * patch + py) * image + gc * patch + px);
    return idx;
}

struct PreparedSample {
    Var img_a, resp_a;  // {H*W, 1} constants
    Var img_b, resp_b;
    int label = 0;
};

PreparedSample prepare(const synth::SyntheticPair& pair, filters::FilterKind kind) {
    auto column = [](const std::vector<double>& v) {
        return num::constant(Tensor({v.size(), 1}, v));
    };
    const Image fa = filters::apply_filter(kind, pair.a);
    const Image fb = filters::apply_filter(kind, pair.b);
    PreparedSample s;
    s.img_a = column(pair.a.pix);
    s.resp_a = column(fa.pix);
    s.img_b = column(pair.b.pix);
    s.resp_b = column(fb.pix);
    s.label = pair.category;
    return s;
}

struct Branch {
    Var alpha;
    std::vector<Var> embeds;  // one per level

    std::size_t param_count() const {
        std::size_t n = alpha->value.size();
        for (const auto& e : embeds) n += e->value.size();
        return n;
    }
    std::vector<Var> parameters() const {
        std::vector<Var> out = {alpha};
        out.insert(out.end(), embeds.begin(), embeds.end());
        return out;
    }
};

Branch init_branch(const ToyConfig& cfg, SplitMix64 rng, const std::string& prefix) {
    Branch br;
    br.alpha = num::parameter(Tensor::scalar(cfg.alpha_init), prefix + ".alpha");
    for (int level : cfg.cmim.levels) {
        const std::size_t p = patch_size_for_level(level);
        Tensor w({p * p, cfg.channels});
        const double scale = 1.0 / static_cast<double>(p);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = scale * rng.normal();
        br.embeds.push_back(num::parameter(std::move(w), prefix + ".embed" + std::to_string(level)));
    }
    return br;
}

// FAM residual, centered pixels, then patch embedding with a bounded
// nonlinearity. Centering keeps the embedding pre-activations out of the
// tanh saturation regime regardless of the random projection draw.
std::vector<Var> branch_grids(const Var& img, const Var& resp, const Branch& br,
                              const ToyConfig& cfg,
                              const std::vector<std::vector<std::size_t>>& orders) {
    Var fam = num::add_scalar(num::add(img, num::mul(resp, br.alpha)), -0.5);
    std::vector<Var> grids;
    for (std::size_t li = 0; li < br.embeds.size(); ++li) {
        const std::size_t p = patch_size_for_level(cfg.cmim.levels[li]);
        const std::size_t grid = cfg.image_size / p;
        Var patches = num::reshape(num::gather_rows(fam, orders[li]), {grid * grid, p * p});
        grids.push_back(num::tanh(num::matmul(patches, br.embeds[li])));
    }
    return grids;
}

struct Head {
    Var w, b;
};

Head init_head(std::size_t in_dim) {
    // zero init: untrained logits are exactly zero, ties resolve to class 0
    Head h;
    h.w = num::parameter(Tensor({in_dim, 2}), "head.w");
    h.b = num::parameter(Tensor({1, 2}), "head.b");
    return h;
}

Var head_logits(const std::vector<Var>& pooled, const Head& head) {
    Var stacked = pooled.size() == 1 ? pooled[0] : num::concat_rows(pooled);
    Var flat = num::reshape(stacked, {1, stacked->value.size()});
    return num::add(num::matmul(flat, head.w), head.b);
}

Var bce_class_loss(const Var& logits, int label) {
    Tensor onehot({1, 2});
    onehot[static_cast<std::size_t>(label)] = 1.0;
    return num::mean(num::sub(num::softplus(logits), num::mul(logits, num::constant(onehot))));
}

struct Model {
    std::string name;
    bool fused = false;
    bool use_b = false;  // for single-modality models
    Branch branch_a, branch_b;
    ssm::CMIMBlock cmim;
    afm::AFMParams afm_params;
    const ToyConfig* cfg = nullptr;
    std::vector<std::vector<std::size_t>> orders;
    Head head;
    std::vector<Var> params;

    Var logits(const PreparedSample& s) const {
        std::vector<Var> pooled;
        if (!fused) {
            const Branch& br = use_b ? branch_b : branch_a;
            const Var& img = use_b ? s.img_b : s.img_a;
            const Var& resp = use_b ? s.resp_b : s.resp_a;
            for (Var g : branch_grids(img, resp, br, *cfg, orders))
                pooled.push_back(num::scale(num::mean_rows(g), kPoolGain));
        } else {
            std::vector<Var> ga = branch_grids(s.img_a, s.resp_a, branch_a, *cfg, orders);
            std::vector<Var> gb = branch_grids(s.img_b, s.resp_b, branch_b, *cfg, orders);
            for (std::size_t li = 0; li < ga.size(); ++li) {
                const std::size_t grid =
                    cfg->image_size / patch_size_for_level(cfg->cmim.levels[li]);
                auto [eo, es] = ssm::cmim_forward_var(ga[li], gb[li], grid, grid, cmim);
                Var o_sum = num::add(eo, ga[li]);
                Var s_sum = num::add(es, gb[li]);
                Var fusedmap = afm::afm_fuse_var(o_sum, s_sum, grid, grid, cfg->area, afm_params);
                pooled.push_back(num::scale(num::mean_rows(fusedmap), kPoolGain));
            }
        }
        return head_logits(pooled, head);
    }
};

Model build_model(const std::string& name, const ToyConfig& cfg,
                  const std::vector<std::vector<std::size_t>>& orders, SplitMix64 init_rng) {
    Model m;
    m.name = name;
    m.cfg = &cfg;
    m.orders = orders;
    m.fused = name == "fused";
    m.use_b = name == "b_only";
    const std::size_t levels = cfg.cmim.levels.size();

    if (m.fused) {
        m.branch_a = init_branch(cfg, init_rng.split("branch_a"), "a");
        m.branch_b = init_branch(cfg, init_rng.split("branch_b"), "b");
        SplitMix64 cr = init_rng.split("cmim");
        m.cmim = ssm::CMIMBlock::init(cfg.cmim, cfg.channels, cr, "cmim");
        SplitMix64 ar = init_rng.split("afm");
        m.afm_params = afm::AFMParams::init(cfg.channels, cfg.area.head_dim, ar, "afm");
    } else if (m.use_b) {
        m.branch_b = init_branch(cfg, init_rng.split("branch_b"), "b");
    } else {
        m.branch_a = init_branch(cfg, init_rng.split("branch_a"), "a");
    }
    m.head = init_head(cfg.channels * levels);

    if (m.fused) {
        auto pa = m.branch_a.parameters();
        auto pb = m.branch_b.parameters();
        auto pc = m.cmim.parameters();
        auto pf = m.afm_params.parameters();
        m.params.insert(m.params.end(), pa.begin(), pa.end());
        m.params.insert(m.params.end(), pb.begin(), pb.end());
        m.params.insert(m.params.end(), pc.begin(), pc.end());
        m.params.insert(m.params.end(), pf.begin(), pf.end());
    } else {
        auto p = (m.use_b ? m.branch_b : m.branch_a).parameters();
        m.params.insert(m.params.end(), p.begin(), p.end());
    }
    m.params.push_back(m.head.w);
    m.params.push_back(m.head.b);
    return m;
}

struct Sgd {
    double lr, mu;
    std::vector<Tensor> vel;

    void step(const std::vector<Var>& params) {
        if (vel.empty())
            for (const auto& p : params) vel.push_back(Tensor::zeros(p->value.shape()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i]->ensure_grad();
            for (std::size_t k = 0; k < vel[i].size(); ++k) {
                vel[i][k] = mu * vel[i][k] + params[i]->grad[k];
                params[i]->value[k] -= lr * vel[i][k];
            }
        }
    }
};

int predict(const Model& m, const PreparedSample& s) {
    Var z = m.logits(s);
    return z->value[1] > z->value[0] ? 1 : 0;
}

double accuracy(const Model& m, const std::vector<PreparedSample>& samples) {
    std::size_t hit = 0;
    for (const auto& s : samples)
        if (predict(m, s) == s.label) ++hit;
    return samples.empty() ? 0.0 : static_cast<double>(hit) / samples.size();
}

ModelReport train_model(Model& m, const ToyConfig& cfg, const std::vector<PreparedSample>& train,
                        const std::vector<PreparedSample>& test, SplitMix64 shuffle_rng) {
    ModelReport rep;
    rep.model = m.name;
    rep.untrained_accuracy = accuracy(m, test);

    Sgd opt{cfg.lr, cfg.momentum, {}};
    std::vector<std::size_t> idx(train.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        SplitMix64 er = shuffle_rng.split(epoch);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[er.next_below(i)]);

        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < idx.size()) {
            const std::size_t take = std::min(cfg.batch, idx.size() - done);
            num::zero_grad(m.params);
            for (std::size_t k = 0; k < take; ++k) {
                const PreparedSample& s = train[idx[done + k]];
                Var loss = num::scale(bce_class_loss(m.logits(s), s.label),
                                      1.0 / static_cast<double>(take));
                const double lv = loss->value[0] * static_cast<double>(take);
                if (!std::isfinite(lv))
                    throw std::runtime_error("toy training diverged (" + m.name + ", " +
                                             cfg.name() + ")");
                epoch_loss += lv;
                num::backward(loss);
            }
            opt.step(m.params);
            done += take;
        }
        rep.epoch_loss.push_back(epoch_loss / static_cast<double>(idx.size()));
        rep.epoch_accuracy.push_back(accuracy(m, test));
    }
    rep.accuracy = rep.epoch_accuracy.empty() ? rep.untrained_accuracy : rep.epoch_accuracy.back();

    rep.param_total = 0;
    for (const auto& p : m.params) rep.param_total += p->value.size();
    if (m.fused) {
        rep.param_breakdown = {
            {"branch_a", m.branch_a.param_count()},
            {"branch_b", m.branch_b.param_count()},
            {"cmim", m.cmim.parameter_count()},
            {"afm", m.afm_params.parameter_count()},
            {"head", m.head.w->value.size() + m.head.b->value.size()},
        };
        rep.alphas = {m.branch_a.alpha->value[0], m.branch_b.alpha->value[0]};
    } else {
        const Branch& br = m.use_b ? m.branch_b : m.branch_a;
        rep.param_breakdown = {
            {"branch", br.param_count()},
            {"head", m.head.w->value.size() + m.head.b->value.size()},
        };
        rep.alphas = {br.alpha->value[0]};
    }
    return rep;
}

std::string fmt(double v, int prec = 6) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

std::string model_json(const ModelReport& r) {
    std::ostringstream os;
    os << "{\"model\": \"" << r.model << "\", \"accuracy\": " << fmt(r.accuracy)
       << ", \"untrained_accuracy\": " << fmt(r.untrained_accuracy)
       << ", \"params\": " << r.param_total << ", \"breakdown\": {";
    for (std::size_t i = 0; i < r.param_breakdown.size(); ++i)
        os << (i ? ", " : "") << "\"" << r.param_breakdown[i].first
           << "\": " << r.param_breakdown[i].second;
    os << "}, \"alphas\": [";
    for (std::size_t i = 0; i < r.alphas.size(); ++i) os << (i ? ", " : "") << fmt(r.alphas[i]);
    os << "], \"epoch_loss\": [";
    for (std::size_t i = 0; i < r.epoch_loss.size(); ++i)
        os << (i ? ", " : "") << fmt(r.epoch_loss[i]);
    os << "], \"epoch_accuracy\": [";
    for (std::size_t i = 0; i < r.epoch_accuracy.size(); ++i)
        os << (i ? ", " : "") << fmt(r.epoch_accuracy[i]);
    os << "]}";
    return os.str();
}

}  // namespace

ExperimentReport toy_fusion_experiment(const ToyConfig& cfg) {
    cfg.cmim.validate();
    cfg.area.validate();
    if (cfg.image_size % patch_size_for_level(cfg.cmim.levels.back()) != 0)
        throw ContractError("toy_fusion_experiment: image size must be divisible by the patch "
                            "size of every level");

    synth::SynthConfig sc;
    sc.pairs = cfg.train_pairs + cfg.test_pairs;
    sc.image_size = cfg.image_size;
    sc.occlusion_rate = cfg.occlusion_rate;
    sc.speckle = cfg.speckle;
    sc.seed = cfg.seed;
    const auto pairs = synth::generate_synthetic_pairs(sc);

    std::vector<PreparedSample> train, test;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        PreparedSample s = prepare(pairs[i], cfg.filter);
        if (i < cfg.train_pairs)
            train.push_back(std::move(s));
        else
            test.push_back(std::move(s));
    }

    std::vector<std::vector<std::size_t>> orders;
    for (int level : cfg.cmim.levels)
        orders.push_back(patch_order(cfg.image_size, patch_size_for_level(level)));

    SplitMix64 root(cfg.seed);
    ExperimentReport rep;
    rep.cfg = cfg;
    for (const char* name : {"a_only", "b_only", "fused"}) {
        Model m = build_model(name, cfg, orders, root.split("init").split(name));
        ModelReport r = train_model(m, cfg, train, test, root.split("shuffle").split(name));
        if (std::string(name) == "a_only") rep.a_only = r;
        if (std::string(name) == "b_only") rep.b_only = r;
        if (std::string(name) == "fused") {
            rep.fused = r;
            rep.fusion_extra_params = m.cmim.parameter_count() + m.afm_params.parameter_count();
        }
    }
    rep.margin = rep.fused.accuracy - std::max(rep.a_only.accuracy, rep.b_only.accuracy);
    return rep;
}

std::string ExperimentReport::to_json() const {
    std::ostringstream os;
    os << "{\n  \"config\": {\"filter\": \"" << filters::to_string(cfg.filter)
       << "\", \"scan\": \"" << scan::to_string(cfg.cmim.kind)
       << "\", \"hilbert_direction\": " << cfg.cmim.hilbert_direction
       << ", \"state_dim\": " << cfg.cmim.state_dim << ", \"area_k\": " << cfg.area.k
       << ", \"head_dim\": " << cfg.area.head_dim << ", \"seed\": " << cfg.seed
       << ", \"epochs\": " << cfg.epochs << ", \"lr\": " << fmt(cfg.lr)
       << ", \"momentum\": " << fmt(cfg.momentum) << ", \"batch\": " << cfg.batch
       << ", \"train_pairs\": " << cfg.train_pairs << ", \"test_pairs\": " << cfg.test_pairs
       << ", \"occlusion_rate\": " << fmt(cfg.occlusion_rate)
       << ", \"speckle\": " << (cfg.speckle ? "true" : "false") << "},\n";
    os << "  \"a_only\": " << model_json(a_only) << ",\n";
    os << "  \"b_only\": " << model_json(b_only) << ",\n";
    os << "  \"fused\": " << model_json(fused) << ",\n";
    os << "  \"margin\": " << fmt(margin) << ",\n";
    os << "  \"fusion_extra_params\": " << fusion_extra_params << "\n}\n";
    return os.str();
}

std::string ExperimentReport::to_text() const {
    std::ostringstream os;
    os << "toy fusion experiment (" << cfg.name() << ")\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-8s %9s %9s %8s\n", "model", "acc", "untrained", "params");
    os << buf;
    for (const ModelReport* r : {&a_only, &b_only, &fused}) {
        std::snprintf(buf, sizeof(buf), "%-8s %8.1f%% %8.1f%% %8zu\n", r->model.c_str(),
                      100 * r->accuracy, 100 * r->untrained_accuracy, r->param_total);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "margin (fused - best single): %+.1f points\n", 100 * margin);
    os << buf;
    std::snprintf(buf, sizeof(buf), "fusion additions (cmim+afm): +%zu params\n",
                  fusion_extra_params);
    os << buf;
    return os.str();
}

}  // namespace osf::toy
