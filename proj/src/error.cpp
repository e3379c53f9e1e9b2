// SPDX-License-Identifier: Apache-2.0

#include "ticktack/error.hpp"

namespace ticktack {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::YearZero: return "YearZero";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::InvalidRange: return "InvalidRange";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::TokenizationFailure: return "TokenizationFailure";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::EmptyHistogram: return "EmptyHistogram";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::SequenceTooLong: return "SequenceTooLong";
        case ErrorCode::EmptySequence: return "EmptySequence";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::EmptyPartition: return "EmptyPartition";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DegeneratePartition: return "DegeneratePartition";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace ticktack
