// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

namespace ticktack {

struct NamedTensor {
    std::string name;
    Eigen::MatrixXd value;
    bool trainable = true;
};

/// Ordered collection of named tensors. The flat view concatenates tensors in
/// insertion order, each in row-major order.
class ParameterSet {
public:
    ParameterSet() = default;

    void add(std::string name, Eigen::MatrixXd value, bool trainable = true);

    [[nodiscard]] std::size_t tensor_count() const noexcept { return tensors_.size(); }
    [[nodiscard]] Eigen::Index size() const noexcept;  // flat length P

    [[nodiscard]] const NamedTensor& operator[](std::size_t i) const { return tensors_[i]; }
    [[nodiscard]] NamedTensor& operator[](std::size_t i) { return tensors_[i]; }
    [[nodiscard]] const Eigen::MatrixXd& at(std::string_view name) const;
    [[nodiscard]] Eigen::MatrixXd& at(std::string_view name);
    [[nodiscard]] bool contains(std::string_view name) const;
    [[nodiscard]] int index_of(std::string_view name) const;  // -1 when absent

    [[nodiscard]] auto begin() const { return tensors_.begin(); }
    [[nodiscard]] auto end() const { return tensors_.end(); }
    [[nodiscard]] auto begin() { return tensors_.begin(); }
    [[nodiscard]] auto end() { return tensors_.end(); }

    [[nodiscard]] Eigen::VectorXd flat() const;
    /// Overwrites every tensor from a flat vector of length size().
    void assign_flat(const Eigen::VectorXd& flat);

    /// Same names, order and shapes.
    [[nodiscard]] bool same_layout(const ParameterSet& other) const;

    /// Zero-valued copy with identical layout.
    [[nodiscard]] ParameterSet zeros_like() const;

    /// this += factor * other. Throws Error{ShapeMismatch} on differing layouts.
    void axpy(double factor, const ParameterSet& other);

    friend bool operator==(const ParameterSet& a, const ParameterSet& b);

private:
    std::vector<NamedTensor> tensors_;
};

/// Throws Error{ShapeMismatch} unless a and b share a layout.
void require_same_layout(const ParameterSet& a, const ParameterSet& b, const char* what);

}  // namespace ticktack
