#pragma once

// Small differentiable core: dense MLPs with explicit forward/backward passes,
// tanh-squashed Gaussian heads and an Adam update. Everything is templated on
// the scalar type; training runs in float, gradient oracles in double.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace hdsac::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class Activation : std::uint32_t { identity = 0, relu = 1 };

template <typename T>
struct Layer {
    Matrix<T> weight;  // out x in
    Vector<T> bias;    // out
    Activation activation = Activation::identity;
};

/// Parameters of a dense network. Gradients use the same type.
template <typename T>
struct Mlp {
    std::vector<Layer<T>> layers;

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;
    std::size_t parameter_count() const;

    /// Throws ContractViolation if consecutive shapes do not chain or a value
    /// is non-finite.
    void validate() const;

    Mlp zeros_like() const;

    template <typename U>
    Mlp<U> cast() const {
        Mlp<U> out;
        out.layers.reserve(layers.size());
        for (const auto& l : layers) {
            out.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>(), l.activation});
        }
        return out;
    }
};

struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden{256, 256};
    int output_dim = 0;
    Activation hidden_activation = Activation::relu;
    /// Multiplier on the last layer's init so fresh heads output ~0.
    double final_layer_scale = 1e-2;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases.
template <typename T>
Mlp<T> make_mlp(const MlpSpec& spec, std::mt19937_64& rng);

template <typename T>
struct ForwardCache {
    std::vector<Matrix<T>> inputs;          // input to each layer
    std::vector<Matrix<T>> preactivations;  // affine output of each layer
};

/// Batched forward pass: columns of `input` are samples.
template <typename T>
Matrix<T> forward(const Mlp<T>& net, const Matrix<T>& input, ForwardCache<T>* cache = nullptr);

/// Batched backward pass. `param_grads`, when given, is overwritten with the
/// gradient of sum_b <output_grad_b, output_b>. Returns the input gradient.
template <typename T>
Matrix<T> backward(const Mlp<T>& net, const ForwardCache<T>& cache, const Matrix<T>& output_grad,
                   Mlp<T>* param_grads);

template <typename T>
struct Forward {
    Vector<T> output;
    ForwardCache<T> cache;
};

template <typename T>
struct Backward {
    Mlp<T> param_grads;
    Vector<T> input_grad;
};

template <typename T>
Forward<T> mlp_forward(const Mlp<T>& net, const Vector<T>& input);

template <typename T>
Backward<T> mlp_backward(const Mlp<T>& net, const ForwardCache<T>& cache, const Vector<T>& output_grad);

// Parameter-space arithmetic.
template <typename T>
void require_same_shape(const Mlp<T>& a, const Mlp<T>& b, const char* what);
template <typename T>
void add_in_place(Mlp<T>& dst, const Mlp<T>& src);
template <typename T>
void scale_in_place(Mlp<T>& dst, T factor);
/// target <- tau * online + (1 - tau) * target, per component.
template <typename T>
void lerp_in_place(Mlp<T>& target, const Mlp<T>& online, double tau);
/// Empty string when all values are finite, else the first offending path,
/// e.g. "layers[1].weight(3,4)".
template <typename T>
std::string first_non_finite(const Mlp<T>& net);

// ---------------------------------------------------------------------------
// Tanh-squashed diagonal Gaussian

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEpsilon = 1e-6;

template <typename T>
struct GaussianHead {
    Vector<T> mean;
    Vector<T> log_std;

    /// exp(log_std) with log_std clamped to [kLogStdMin, kLogStdMax].
    Vector<T> std() const;
};

template <typename T>
struct SquashedSample {
    Vector<T> action;
    T log_prob;
};

/// action = tanh(mean + std * noise); log_prob includes the tanh log-det
/// correction with kTanhEpsilon.
template <typename T>
SquashedSample<T> squashed_sample(const GaussianHead<T>& head, const Vector<T>& noise);

/// Batched squashed sampling that keeps what the backward pass needs.
template <typename T>
struct SquashedBatch {
    Matrix<T> action;       // d x B
    RowVector<T> log_prob;  // 1 x B
    Matrix<T> noise;
    Matrix<T> std;
    Matrix<T> clamp_mask;  // 1 where log_std was inside the clamp range
};

template <typename T>
SquashedBatch<T> squash_forward(const Matrix<T>& mean, const Matrix<T>& log_std, const Matrix<T>& noise);

/// Chain rule through the reparameterised sample at fixed noise.
template <typename T>
void squash_backward(const SquashedBatch<T>& batch, const Matrix<T>& action_grad,
                     const RowVector<T>& log_prob_grad, Matrix<T>& mean_grad, Matrix<T>& log_std_grad);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct OptimizerState {
    Mlp<T> first_moment;
    Mlp<T> second_moment;
    std::int64_t step = 0;
    AdamConfig config;
};

template <typename T>
OptimizerState<T> make_optimizer(const Mlp<T>& params, const AdamConfig& config);

/// Bias-corrected Adam step. Throws TrainingDivergence naming the first
/// non-finite gradient component; params and state are untouched in that case.
template <typename T>
void adam_step(Mlp<T>& params, const Mlp<T>& grads, OptimizerState<T>& state);

// ---------------------------------------------------------------------------
// Parameter records: "HDSACNN1" magic, u32 schema version, u32 layer count,
// per layer (u32 rows, u32 cols, u32 activation), then per layer the weight
// matrix row-major followed by the bias, all little-endian float32.

inline constexpr std::uint32_t kParamsSchemaVersion = 1;

template <typename T>
void write_params(std::ostream& out, const Mlp<T>& net);
template <typename T>
Mlp<T> read_params(std::istream& in);

template <typename T>
void save_params(const std::filesystem::path& path, const Mlp<T>& net);
template <typename T>
Mlp<T> load_params(const std::filesystem::path& path);

}  // namespace hdsac::nn
