// Rate + latency feature encoding of observation matrices and the multinomial
// logistic-regression readout trained with L-BFGS.
#pragma once

#include "bsnn/spikeio.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace bsnn::readout {

using spikeio::ObservationMatrix;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kFirstSpikes = 20;
inline constexpr int kFeaturesPerNeuron = 2 + kFirstSpikes;

enum class Encoding { Rate, Latency, Combined };
std::string to_string(Encoding e);
Encoding encoding_from_string(const std::string& s);
int feature_count(Encoding e, int neurons);

/// Unscaled per-observation statistics.
struct RawFeatures {
    std::vector<double> counts;   // per neuron
    std::vector<int> first_bins;  // neuron-major, kFirstSpikes per neuron, -1 when absent
};
RawFeatures raw_features(const ObservationMatrix& o);

struct ScalerState {
    int neurons = 0;
    int bins = 0;
    std::vector<double> rate_std;       // 2N: absolute counts, then relative counts
    std::vector<double> latency_median; // 20N
    std::vector<double> latency_iqr;    // 20N
    double imputation = 0.0;            // 0.99 quantile of pooled training spike bins

    bool fitted() const { return neurons > 0; }
    friend bool operator==(const ScalerState&, const ScalerState&) = default;
};

ScalerState fit_scaler(std::span<const ObservationMatrix> train);
ScalerState fit_scaler(std::span<const ObservationMatrix* const> train);
std::vector<double> encode(const ObservationMatrix& o, const ScalerState& scaler, Encoding mode);
/// Elementwise mean of equally long vectors.
std::vector<double> average_features(std::span<const std::vector<double>> runs);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double p);

struct SoftmaxModel {
    Matrix W; // K x d
    Vector b; // K

    SoftmaxModel() = default;
    SoftmaxModel(int classes, int dim) : W(Matrix::Zero(classes, dim)), b(Vector::Zero(classes)) {}
    int classes() const { return static_cast<int>(W.rows()); }
    int dim() const { return static_cast<int>(W.cols()); }
    long long parameter_count() const { return static_cast<long long>(W.size() + b.size()); }

    Vector probabilities(const Eigen::Ref<const Vector>& x) const;
    int predict(const Eigen::Ref<const Vector>& x) const;

    /// Flat view [W row-major, b] used by the optimiser.
    Vector parameters() const;
    void set_parameters(const Vector& theta);
};

/// Numerically stable softmax.
Vector softmax(const Eigen::Ref<const Vector>& logits);

struct LossGradient {
    double loss = 0.0;
    Vector gradient; // same layout as SoftmaxModel::parameters()
};

/// -(1/m) sum log P(y_i | x_i) + (1 / 2C) (|W|^2 + |b|^2).
LossGradient loss_and_gradient(const SoftmaxModel& model, const Matrix& X,
                               std::span<const int> y, double C);

struct LbfgsOptions {
    int history = 10;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6; // on the max-abs gradient entry
    int max_line_search = 40;
};

struct LbfgsResult {
    Vector x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// f(x, grad) returns the objective and fills its gradient.
using Objective = std::function<double(const Vector& x, Vector& grad)>;
LbfgsResult minimize_lbfgs(const Objective& f, Vector x0, const LbfgsOptions& options = {});

struct TrainConfig {
    double C = 0.01;
    LbfgsOptions optimizer{};
};

struct TrainResult {
    SoftmaxModel model;
    double loss = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false; // false: best iterate returned after max_iterations
};

TrainResult train(const Matrix& X, std::span<const int> y, int classes, const TrainConfig& config = {});

struct Evaluation {
    double accuracy = 0.0;
    Eigen::MatrixXi confusion; // rows: true label, columns: prediction
};

Evaluation evaluate(const SoftmaxModel& model, const Matrix& X, std::span<const int> y);

/// Stacks equally long feature vectors into rows.
Matrix stack_rows(std::span<const std::vector<double>> rows);

struct Checkpoint {
    SoftmaxModel model;
    ScalerState scaler;
    Encoding encoding = Encoding::Combined;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& file);

void write_confusion_csv(const Eigen::MatrixXi& confusion, std::ostream& out,
                         std::span<const int> labels = {});

} // namespace bsnn::readout
