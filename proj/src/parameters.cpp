// SPDX-License-Identifier: Apache-2.0

#include "ticktack/parameters.hpp"

#include "ticktack/error.hpp"

namespace ticktack {

void ParameterSet::add(std::string name, Eigen::MatrixXd value, bool trainable) {
    if (contains(name)) throw Error(ErrorCode::InvalidConfig, "duplicate tensor '" + name + "'");
    tensors_.push_back({std::move(name), std::move(value), trainable});
}

Eigen::Index ParameterSet::size() const noexcept {
    Eigen::Index n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
}

int ParameterSet::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

bool ParameterSet::contains(std::string_view name) const { return index_of(name) >= 0; }

const Eigen::MatrixXd& ParameterSet::at(std::string_view name) const {
    const int i = index_of(name);
    if (i < 0) throw Error(ErrorCode::ShapeMismatch, "no tensor named '" + std::string(name) + "'");
    return tensors_[static_cast<std::size_t>(i)].value;
}

Eigen::MatrixXd& ParameterSet::at(std::string_view name) {
    return const_cast<Eigen::MatrixXd&>(std::as_const(*this).at(name));
}

Eigen::VectorXd ParameterSet::flat() const {
    Eigen::VectorXd out(size());
    Eigen::Index at = 0;
    for (const auto& t : tensors_) {
        for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) out(at++) = t.value(r, c);
        }
    }
    return out;
}

void ParameterSet::assign_flat(const Eigen::VectorXd& flat) {
    if (flat.size() != size()) throw Error(ErrorCode::ShapeMismatch, "flat vector length differs");
    Eigen::Index at = 0;
    for (auto& t : tensors_) {
        for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = flat(at++);
        }
    }
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        const auto& a = tensors_[i];
        const auto& b = other.tensors_[i];
        if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
            return false;
        }
    }
    return true;
}

ParameterSet ParameterSet::zeros_like() const {
    ParameterSet out;
    for (const auto& t : tensors_) {
        out.add(t.name, Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()), t.trainable);
    }
    return out;
}

void ParameterSet::axpy(double factor, const ParameterSet& other) {
    require_same_layout(*this, other, "axpy");
    for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].value += factor * other.tensors_[i].value;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (!a.same_layout(b)) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
        if (a.tensors_[i].value != b.tensors_[i].value) return false;
    }
    return true;
}

void require_same_layout(const ParameterSet& a, const ParameterSet& b, const char* what) {
    if (!a.same_layout(b)) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": parameter layouts differ");
    }
}

}  // namespace ticktack
