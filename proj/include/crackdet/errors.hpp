#pragma once

#include <stdexcept>
#include <string>

namespace crackdet {

// Error taxonomy. The CLI maps these onto exit codes: UsageError -> 1,
// DataError -> 2, NumericError -> 3.

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// imagecore
struct UnsupportedFormat : DataError { using DataError::DataError; };
struct CorruptFile : DataError { using DataError::DataError; };
struct IoFailure : DataError { using DataError::DataError; };
struct NonFiniteValue : NumericError { using NumericError::NumericError; };

// thresholding
struct DegenerateHistogram : NumericError { using NumericError::NumericError; };
struct ThresholdOutOfRange : UsageError { using UsageError::UsageError; };
struct BothMeansZero : NumericError { using NumericError::NumericError; };

// metrics
struct DimensionMismatch : DataError { using DataError::DataError; };
struct UndefinedMeasure : NumericError { using NumericError::NumericError; };
struct NoTruePositives : NumericError { using NumericError::NumericError; };

// autodiff / network
struct ShapeMismatch : DataError { using DataError::DataError; };
struct IndexOutOfWindow : DataError { using DataError::DataError; };
struct ConfigInvalid : UsageError { using UsageError::UsageError; };
struct CheckpointMismatch : DataError { using DataError::DataError; };
struct DatasetEmpty : DataError { using DataError::DataError; };
struct NonFiniteLoss : NumericError { using NumericError::NumericError; };

// cli
struct EmptySample : DataError { using DataError::DataError; };
struct WindowTooSmall : UsageError { using UsageError::UsageError; };

}  // namespace crackdet
