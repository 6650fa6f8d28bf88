#include "hdsac/nn.hpp"

#include "hdsac/errors.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace hdsac::nn {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

template <typename T>
void check_finite_or_throw(const Mlp<T>& net) {
    if (auto path = first_non_finite(net); !path.empty()) {
        throw ContractViolation("non-finite parameter at " + path);
    }
}

}  // namespace

template <typename T>
Eigen::Index Mlp<T>::input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.cols();
}

template <typename T>
Eigen::Index Mlp<T>::output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.rows();
}

template <typename T>
std::size_t Mlp<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

template <typename T>
void Mlp<T>::validate() const {
    if (layers.empty()) throw ContractViolation("network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        if (l.bias.size() != l.weight.rows()) {
            throw ContractViolation("layers[" + std::to_string(k) + "]: bias length " +
                                    std::to_string(l.bias.size()) + " != weight rows " +
                                    std::to_string(l.weight.rows()));
        }
        if (k + 1 < layers.size() && layers[k + 1].weight.cols() != l.weight.rows()) {
            throw ContractViolation("layers[" + std::to_string(k + 1) + "] expects input " +
                                    std::to_string(layers[k + 1].weight.cols()) + " but layers[" +
                                    std::to_string(k) + "] outputs " + std::to_string(l.weight.rows()));
        }
    }
    check_finite_or_throw(*this);
}

template <typename T>
Mlp<T> Mlp<T>::zeros_like() const {
    Mlp out;
    out.layers.reserve(layers.size());
    for (const auto& l : layers) {
        out.layers.push_back({Matrix<T>::Zero(l.weight.rows(), l.weight.cols()),
                              Vector<T>::Zero(l.bias.size()), l.activation});
    }
    return out;
}

template <typename T>
Mlp<T> make_mlp(const MlpSpec& spec, std::mt19937_64& rng) {
    if (spec.input_dim <= 0 || spec.output_dim <= 0) {
        throw ContractViolation("make_mlp: input/output dims must be positive");
    }
    std::vector<int> dims{spec.input_dim};
    dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
    dims.push_back(spec.output_dim);

    Mlp<T> net;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const int fan_in = dims[k];
        const int fan_out = dims[k + 1];
        if (fan_out <= 0) throw ContractViolation("make_mlp: hidden width must be positive");
        const bool last = k + 2 == dims.size();
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const double scale = last ? spec.final_layer_scale : 1.0;

        Layer<T> layer;
        layer.weight.resize(fan_out, fan_in);
        layer.bias.resize(fan_out);
        // Row-major fill order so the draw sequence does not depend on storage order.
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = static_cast<T>(dist(rng) * scale);
        }
        for (int r = 0; r < fan_out; ++r) layer.bias(r) = static_cast<T>(dist(rng) * scale);
        layer.activation = last ? Activation::identity : spec.hidden_activation;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

template <typename T>
Matrix<T> forward(const Mlp<T>& net, const Matrix<T>& input, ForwardCache<T>* cache) {
    if (net.layers.empty()) throw ContractViolation("forward: network has no layers");
    if (input.rows() != net.input_dim()) {
        throw ContractViolation("forward: input has " + std::to_string(input.rows()) +
                                " rows, network expects " + std::to_string(net.input_dim()));
    }
    if (cache) {
        cache->inputs.resize(net.layers.size());
        cache->preactivations.resize(net.layers.size());
    }
    Matrix<T> x = input;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        Matrix<T> z = l.weight * x;
        z.colwise() += l.bias;
        if (cache) {
            cache->inputs[k] = std::move(x);
            cache->preactivations[k] = z;
        }
        if (l.activation == Activation::relu) {
            x = z.cwiseMax(T(0));
        } else {
            x = std::move(z);
        }
    }
    return x;
}

template <typename T>
Matrix<T> backward(const Mlp<T>& net, const ForwardCache<T>& cache, const Matrix<T>& output_grad,
                   Mlp<T>* param_grads) {
    const std::size_t n = net.layers.size();
    if (cache.inputs.size() != n || cache.preactivations.size() != n) {
        throw ContractViolation("backward: cache does not belong to this network");
    }
    const auto batch = cache.inputs.front().cols();
    if (output_grad.rows() != net.output_dim() || output_grad.cols() != batch) {
        throw ContractViolation("backward: output_grad is " + shape_str(output_grad.rows(), output_grad.cols()) +
                                ", expected " + shape_str(net.output_dim(), batch));
    }
    if (param_grads && param_grads->layers.size() != n) *param_grads = net.zeros_like();

    Matrix<T> grad = output_grad;
    for (std::size_t k = n; k-- > 0;) {
        const auto& l = net.layers[k];
        if (l.activation == Activation::relu) {
            grad = (cache.preactivations[k].array() > T(0)).select(grad, T(0));
        }
        if (param_grads) {
            auto& g = param_grads->layers[k];
            g.weight.noalias() = grad * cache.inputs[k].transpose();
            g.bias = grad.rowwise().sum();
            g.activation = l.activation;
        }
        grad = l.weight.transpose() * grad;
    }
    return grad;
}

template <typename T>
Forward<T> mlp_forward(const Mlp<T>& net, const Vector<T>& input) {
    Forward<T> out;
    Matrix<T> y = forward<T>(net, Matrix<T>(input), &out.cache);
    out.output = y.col(0);
    return out;
}

template <typename T>
Backward<T> mlp_backward(const Mlp<T>& net, const ForwardCache<T>& cache, const Vector<T>& output_grad) {
    Backward<T> out;
    out.param_grads = net.zeros_like();
    out.input_grad = backward<T>(net, cache, Matrix<T>(output_grad), &out.param_grads).col(0);
    return out;
}

template <typename T>
void require_same_shape(const Mlp<T>& a, const Mlp<T>& b, const char* what) {
    bool ok = a.layers.size() == b.layers.size();
    for (std::size_t k = 0; ok && k < a.layers.size(); ++k) {
        ok = a.layers[k].weight.rows() == b.layers[k].weight.rows() &&
             a.layers[k].weight.cols() == b.layers[k].weight.cols() &&
             a.layers[k].bias.size() == b.layers[k].bias.size();
    }
    if (!ok) throw ContractViolation(std::string(what) + ": parameter shapes differ");
}

template <typename T>
void add_in_place(Mlp<T>& dst, const Mlp<T>& src) {
    require_same_shape(dst, src, "add_in_place");
    for (std::size_t k = 0; k < dst.layers.size(); ++k) {
        dst.layers[k].weight += src.layers[k].weight;
        dst.layers[k].bias += src.layers[k].bias;
    }
}

template <typename T>
void scale_in_place(Mlp<T>& dst, T factor) {
    for (auto& l : dst.layers) {
        l.weight *= factor;
        l.bias *= factor;
    }
}

template <typename T>
void lerp_in_place(Mlp<T>& target, const Mlp<T>& online, double tau) {
    require_same_shape(target, online, "soft update");
    const T a = static_cast<T>(tau);
    const T b = static_cast<T>(1.0 - tau);
    for (std::size_t k = 0; k < target.layers.size(); ++k) {
        auto& t = target.layers[k];
        const auto& o = online.layers[k];
        t.weight = a * o.weight + b * t.weight;
        t.bias = a * o.bias + b * t.bias;
    }
}

template <typename T>
std::string first_non_finite(const Mlp<T>& net) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
                if (!std::isfinite(static_cast<double>(l.weight(r, c)))) {
                    return "layers[" + std::to_string(k) + "].weight(" + std::to_string(r) + "," +
                           std::to_string(c) + ")";
                }
            }
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
            if (!std::isfinite(static_cast<double>(l.bias(r)))) {
                return "layers[" + std::to_string(k) + "].bias(" + std::to_string(r) + ")";
            }
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

template <typename T>
Vector<T> GaussianHead<T>::std() const {
    return log_std.cwiseMax(T(kLogStdMin)).cwiseMin(T(kLogStdMax)).array().exp().matrix();
}

template <typename T>
SquashedSample<T> squashed_sample(const GaussianHead<T>& head, const Vector<T>& noise) {
    if (head.mean.size() != head.log_std.size() || noise.size() != head.mean.size()) {
        throw ContractViolation("squashed_sample: head and noise dimensions differ");
    }
    auto batch = squash_forward<T>(Matrix<T>(head.mean), Matrix<T>(head.log_std), Matrix<T>(noise));
    return {batch.action.col(0), batch.log_prob(0)};
}

template <typename T>
SquashedBatch<T> squash_forward(const Matrix<T>& mean, const Matrix<T>& log_std, const Matrix<T>& noise) {
    if (mean.rows() != log_std.rows() || mean.cols() != log_std.cols() || noise.rows() != mean.rows() ||
        noise.cols() != mean.cols()) {
        throw ContractViolation("squash_forward: mean/log_std/noise shapes differ");
    }
    const T lo = static_cast<T>(kLogStdMin);
    const T hi = static_cast<T>(kLogStdMax);
    const T eps = static_cast<T>(kTanhEpsilon);
    const T half_log_2pi = static_cast<T>(0.5 * std::log(2.0 * std::numbers::pi));
    // tanh saturates to exactly +-1 in floating point; keep samples strictly inside.
    const T edge = T(1) - std::numeric_limits<T>::epsilon();

    SquashedBatch<T> out;
    const auto d = mean.rows();
    const auto n = mean.cols();
    out.noise = noise;
    out.action.resize(d, n);
    out.std.resize(d, n);
    out.clamp_mask.resize(d, n);
    out.log_prob.resize(n);
    for (Eigen::Index b = 0; b < n; ++b) {
        T lp = T(0);
        for (Eigen::Index i = 0; i < d; ++i) {
            const T raw = log_std(i, b);
            const T ls = std::clamp(raw, lo, hi);
            out.clamp_mask(i, b) = (raw > lo && raw < hi) ? T(1) : T(0);
            const T s = std::exp(ls);
            const T xi = noise(i, b);
            const T a = std::clamp(std::tanh(mean(i, b) + s * xi), -edge, edge);
            out.std(i, b) = s;
            out.action(i, b) = a;
            lp += -T(0.5) * xi * xi - ls - half_log_2pi - std::log(T(1) - a * a + eps);
        }
        out.log_prob(b) = lp;
    }
    return out;
}

template <typename T>
void squash_backward(const SquashedBatch<T>& batch, const Matrix<T>& action_grad,
                     const RowVector<T>& log_prob_grad, Matrix<T>& mean_grad, Matrix<T>& log_std_grad) {
    const auto d = batch.action.rows();
    const auto n = batch.action.cols();
    if (action_grad.rows() != d || action_grad.cols() != n || log_prob_grad.size() != n) {
        throw ContractViolation("squash_backward: gradient shapes differ from the sampled batch");
    }
    const T eps = static_cast<T>(kTanhEpsilon);
    mean_grad.resize(d, n);
    log_std_grad.resize(d, n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const T dlp = log_prob_grad(b);
        for (Eigen::Index i = 0; i < d; ++i) {
            const T a = batch.action(i, b);
            const T one_minus = T(1) - a * a;
            // d log_prob / d pre-tanh
            const T dlp_du = T(2) * a * one_minus / (one_minus + eps);
            const T du = action_grad(i, b) * one_minus + dlp * dlp_du;
            mean_grad(i, b) = du;
            log_std_grad(i, b) =
                batch.clamp_mask(i, b) * (du * batch.std(i, b) * batch.noise(i, b) - dlp);
        }
    }
}

// ---------------------------------------------------------------------------

template <typename T>
OptimizerState<T> make_optimizer(const Mlp<T>& params, const AdamConfig& config) {
    OptimizerState<T> s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    s.config = config;
    return s;
}

template <typename T>
void adam_step(Mlp<T>& params, const Mlp<T>& grads, OptimizerState<T>& state) {
    require_same_shape(params, grads, "adam_step");
    require_same_shape(params, state.first_moment, "adam_step");
    if (auto path = first_non_finite(grads); !path.empty()) {
        throw TrainingDivergence("non-finite gradient at " + path);
    }
    const auto& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(c.beta1);
    const T b2 = static_cast<T>(c.beta2);
    const T corr1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
    const T corr2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
    const T lr = static_cast<T>(c.learning_rate);
    const T eps = static_cast<T>(c.epsilon);

    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (T(1) - b1) * g;
        v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
    };
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        update(params.layers[k].weight, grads.layers[k].weight, state.first_moment.layers[k].weight,
               state.second_moment.layers[k].weight);
        update(params.layers[k].bias, grads.layers[k].bias, state.first_moment.layers[k].bias,
               state.second_moment.layers[k].bias);
    }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 8> kMagic{'H', 'D', 'S', 'A', 'C', 'N', 'N', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b.data(), 4);
}

void put_f32(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    if (!in) throw FormatError(std::string("parameter record truncated while reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& in) {
    const std::uint32_t v = get_u32(in, "values");
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace

template <typename T>
void write_params(std::ostream& out, const Mlp<T>& net) {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kParamsSchemaVersion);
    put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
        put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
        put_u32(out, static_cast<std::uint32_t>(l.activation));
    }
    for (const auto& l : net.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f32(out, static_cast<float>(l.weight(r, c)));
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f32(out, static_cast<float>(l.bias(r)));
    }
    if (!out) throw IoError("failed writing parameter record");
}

template <typename T>
Mlp<T> read_params(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw FormatError("not a parameter record (bad magic)");
    const auto version = get_u32(in, "version");
    if (version != kParamsSchemaVersion) {
        throw FormatError("parameter record schema version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kParamsSchemaVersion) + ")");
    }
    const auto count = get_u32(in, "layer count");
    if (count == 0 || count > 64) throw FormatError("implausible layer count " + std::to_string(count));
    Mlp<T> net;
    net.layers.resize(count);
    for (auto& l : net.layers) {
        const auto rows = get_u32(in, "layer shape");
        const auto cols = get_u32(in, "layer shape");
        const auto act = get_u32(in, "layer shape");
        if (rows == 0 || cols == 0 || rows > (1u << 16) || cols > (1u << 16)) {
            throw FormatError("implausible layer shape " + shape_str(rows, cols));
        }
        if (act > static_cast<std::uint32_t>(Activation::relu)) {
            throw FormatError("unknown activation tag " + std::to_string(act));
        }
        l.weight.resize(rows, cols);
        l.bias.resize(rows);
        l.activation = static_cast<Activation>(act);
    }
    for (auto& l : net.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = static_cast<T>(get_f32(in));
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = static_cast<T>(get_f32(in));
    }
    try {
        net.validate();
    } catch (const ContractViolation& e) {
        throw FormatError(std::string("invalid parameter record: ") + e.what());
    }
    return net;
}

template <typename T>
void save_params(const std::filesystem::path& path, const Mlp<T>& net) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_params(out, net);
}

template <typename T>
Mlp<T> load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return read_params<T>(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

#define HDSAC_NN_INSTANTIATE(T)                                                                           \
    template struct Mlp<T>;                                                                               \
    template struct GaussianHead<T>;                                                                      \
    template Mlp<T> make_mlp<T>(const MlpSpec&, std::mt19937_64&);                                        \
    template Matrix<T> forward<T>(const Mlp<T>&, const Matrix<T>&, ForwardCache<T>*);                     \
    template Matrix<T> backward<T>(const Mlp<T>&, const ForwardCache<T>&, const Matrix<T>&, Mlp<T>*);     \
    template Forward<T> mlp_forward<T>(const Mlp<T>&, const Vector<T>&);                                  \
    template Backward<T> mlp_backward<T>(const Mlp<T>&, const ForwardCache<T>&, const Vector<T>&);        \
    template void require_same_shape<T>(const Mlp<T>&, const Mlp<T>&, const char*);                       \
    template void add_in_place<T>(Mlp<T>&, const Mlp<T>&);                                                \
    template void scale_in_place<T>(Mlp<T>&, T);                                                          \
    template void lerp_in_place<T>(Mlp<T>&, const Mlp<T>&, double);                                       \
    template std::string first_non_finite<T>(const Mlp<T>&);                                              \
    template SquashedSample<T> squashed_sample<T>(const GaussianHead<T>&, const Vector<T>&);              \
    template SquashedBatch<T> squash_forward<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&);    \
    template void squash_backward<T>(const SquashedBatch<T>&, const Matrix<T>&, const RowVector<T>&,      \
                                     Matrix<T>&, Matrix<T>&);                                             \
    template OptimizerState<T> make_optimizer<T>(const Mlp<T>&, const AdamConfig&);                       \
    template void adam_step<T>(Mlp<T>&, const Mlp<T>&, OptimizerState<T>&);                               \
    template void write_params<T>(std::ostream&, const Mlp<T>&);                                          \
    template Mlp<T> read_params<T>(std::istream&);                                                        \
    template void save_params<T>(const std::filesystem::path&, const Mlp<T>&);                            \
    template Mlp<T> load_params<T>(const std::filesystem::path&);

HDSAC_NN_INSTANTIATE(float)
HDSAC_NN_INSTANTIATE(double)

#undef HDSAC_NN_INSTANTIATE

}  // namespace hdsac::nn
