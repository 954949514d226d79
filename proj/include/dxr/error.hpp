#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dxr {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ingest
class MissingColumnError : public Error {
public:
    explicit MissingColumnError(const std::string& column)
        : Error("missing column: " + column), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

class NonMonotonicTimeError : public Error {
public:
    NonMonotonicTimeError(std::size_t row, double prev, double curr)
        : Error("timestamp decreases at row " + std::to_string(row) + " (" +
                std::to_string(prev) + " -> " + std::to_string(curr) + ")"),
          row_(row) {}
    /// 1-based data row (header excluded).
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

class EmptyTraceError : public Error {
public:
    explicit EmptyTraceError(const std::string& what = "trace has no packets") : Error(what) {}
};

class CsvParseError : public Error {
public:
    CsvParseError(std::size_t row, const std::string& column, const std::string& what)
        : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
          row_(row),
          column_(column) {}
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

// segmenter
class SizeZeroError : public Error {
public:
    SizeZeroError() : Error("segment size must be >= 1") {}
};

class DegenerateSplitError : public Error {
public:
    explicit DegenerateSplitError(const std::string& what) : Error(what) {}
};

// fia
class EmptySegmentError : public Error {
public:
    EmptySegmentError() : Error("segment has no packets") {}
};

class UnimodalDistributionError : public Error {
public:
    explicit UnimodalDistributionError(std::size_t peaks)
        : Error("inter-arrival histogram has " + std::to_string(peaks) +
                " qualifying peak(s), need 2") {}
};

class ZeroDurationError : public Error {
public:
    ZeroDurationError() : Error("segment duration is zero") {}
};

// forest
class EmptyTrainingError : public Error {
public:
    EmptyTrainingError() : Error("training set is empty") {}
};

class NonFiniteFeatureError : public Error {
public:
    explicit NonFiniteFeatureError(std::size_t index)
        : Error("feature " + std::to_string(index) + " is not finite") {}
};

class IncompatibleForestsError : public Error {
public:
    explicit IncompatibleForestsError(const std::string& what) : Error(what) {}
};

class StumplessForestError : public Error {
public:
    StumplessForestError() : Error("forest has no internal node") {}
};

// a2rot
class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& what) : Error(what) {}
};

class SegmentSizeMismatchError : public Error {
public:
    SegmentSizeMismatchError(std::size_t model_size, std::size_t requested)
        : Error("model was trained at segment size " + std::to_string(model_size) +
                ", requested " + std::to_string(requested)) {}
};

// metrics
class LengthMismatchError : public Error {
public:
    LengthMismatchError() : Error("label sequences differ in length") {}
};

class LabelOutOfRangeError : public Error {
public:
    explicit LabelOutOfRangeError(int label)
        : Error("label " + std::to_string(label) + " outside 1..C") {}
};

class EmptyMatrixError : public Error {
public:
    EmptyMatrixError() : Error("confusion matrix has no entries") {}
};

// synth
class InvalidProfileError : public Error {
public:
    explicit InvalidProfileError(const std::string& what) : Error(what) {}
};

// persistence
class VersionMismatchError : public Error {
public:
    explicit VersionMismatchError(const std::string& what) : Error(what) {}
};

class CorruptFileError : public Error {
public:
    explicit CorruptFileError(const std::string& what) : Error(what) {}
};

}  // namespace dxr
