// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ticktack {

enum class ErrorCode {
    YearZero,
    OutOfRange,
    InvalidRange,
    InvalidConfig,
    TokenizationFailure,
    IoFailure,
    EmptyHistogram,
    DimensionMismatch,
    SequenceTooLong,
    EmptySequence,
    NonFiniteLoss,
    ZeroVector,
    EmptyPartition,
    InsufficientData,
    ShapeMismatch,
    DegeneratePartition,
    ParseError,
};

const char* to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ticktack
