#include "bsnn/readout.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bsnn::readout {

namespace {

void check_shapes(const SoftmaxModel& model, const Matrix& X, std::span<const int> y) {
    if (X.cols() != model.dim()) throw std::invalid_argument("feature dimension mismatch");
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw std::invalid_argument("feature rows and labels differ in count");
    }
    for (int label : y) {
        if (label < 0 || label >= model.classes()) throw std::invalid_argument("label out of range");
    }
}

} // namespace

Vector softmax(const Eigen::Ref<const Vector>& logits) {
    const double top = logits.maxCoeff();
    Vector e = (logits.array() - top).exp();
    return e / e.sum();
}

Vector SoftmaxModel::probabilities(const Eigen::Ref<const Vector>& x) const {
    return softmax(W * x + b);
}

int SoftmaxModel::predict(const Eigen::Ref<const Vector>& x) const {
    Eigen::Index best = 0;
    (W * x + b).maxCoeff(&best);
    return static_cast<int>(best);
}

Vector SoftmaxModel::parameters() const {
    Vector theta(W.size() + b.size());
    theta.head(W.size()) = Eigen::Map<const Vector>(W.data(), W.size());
    theta.tail(b.size()) = b;
    return theta;
}

void SoftmaxModel::set_parameters(const Vector& theta) {
    if (theta.size() != W.size() + b.size()) throw std::invalid_argument("parameter count mismatch");
    Eigen::Map<Vector>(W.data(), W.size()) = theta.head(W.size());
    b = theta.tail(b.size());
}

LossGradient loss_and_gradient(const SoftmaxModel& model, const Matrix& X, std::span<const int> y,
                               double C) {
    if (!(C > 0.0)) throw std::invalid_argument("regularization C must be positive");
    check_shapes(model, X, y);
    const auto m = static_cast<double>(X.rows());
    const int K = model.classes();

    Matrix Z = X * model.W.transpose();
    Z.rowwise() += model.b.transpose();
    // Running mean keeps identical per-example terms exact.
    double mean_nll = 0.0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        const int yi = y[static_cast<std::size_t>(i)];
        const double top = Z.row(i).maxCoeff();
        const double shifted = Z(i, yi) - top;
        Z.row(i).array() = (Z.row(i).array() - top).exp();
        const double sum = Z.row(i).sum();
        mean_nll += ((std::log(sum) - shifted) - mean_nll) / static_cast<double>(i + 1);
        Z.row(i) /= sum;
        Z(i, yi) -= 1.0;
    }
    const double reg = 1.0 / (2.0 * C);
    LossGradient out;
    out.loss = mean_nll + reg * (model.W.squaredNorm() + model.b.squaredNorm());

    Matrix gW = model.W / C;
    Vector gb = model.b / C;
    if (m > 0) {
        gW.noalias() += (Z.transpose() * X) / m;
        gb += Z.colwise().sum().transpose() / m;
    }
    out.gradient.resize(gW.size() + K);
    out.gradient.head(gW.size()) = Eigen::Map<const Vector>(gW.data(), gW.size());
    out.gradient.tail(K) = gb;
    return out;
}

TrainResult train(const Matrix& X, std::span<const int> y, int classes, const TrainConfig& config) {
    if (classes < 2) throw std::invalid_argument("need at least two classes");
    if (static_cast<long long>(X.rows()) < classes) {
        throw std::invalid_argument("need at least as many examples as classes");
    }
    SoftmaxModel model(classes, static_cast<int>(X.cols()));
    check_shapes(model, X, y);
    SoftmaxModel scratch = model;
    const Objective f = [&](const Vector& theta, Vector& grad) {
        scratch.set_parameters(theta);
        auto lg = loss_and_gradient(scratch, X, y, config.C);
        grad = std::move(lg.gradient);
        return lg.loss;
    };
    const auto r = minimize_lbfgs(f, model.parameters(), config.optimizer);
    model.set_parameters(r.x);
    return TrainResult{std::move(model), r.value, r.gradient_norm, r.iterations, r.converged};
}

Evaluation evaluate(const SoftmaxModel& model, const Matrix& X, std::span<const int> y) {
    check_shapes(model, X, y);
    Evaluation e;
    e.confusion = Eigen::MatrixXi::Zero(model.classes(), model.classes());
    int correct = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const int truth = y[static_cast<std::size_t>(i)];
        const int guess = model.predict(X.row(i).transpose());
        ++e.confusion(truth, guess);
        correct += truth == guess ? 1 : 0;
    }
    e.accuracy = X.rows() > 0 ? static_cast<double>(correct) / static_cast<double>(X.rows()) : 0.0;
    return e;
}

void write_confusion_csv(const Eigen::MatrixXi& confusion, std::ostream& out,
                         std::span<const int> labels) {
    const auto name = [&](Eigen::Index k) {
        return labels.empty() ? std::to_string(k) : std::to_string(labels[static_cast<std::size_t>(k)]);
    };
    out << "true\\predicted";
    for (Eigen::Index k = 0; k < confusion.cols(); ++k) out << ',' << name(k);
    out << '\n';
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
        out << name(r);
        for (Eigen::Index k = 0; k < confusion.cols(); ++k) out << ',' << confusion(r, k);
        out << '\n';
    }
}

} // namespace bsnn::readout
