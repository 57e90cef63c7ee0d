#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrgda {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ClassId = std::uint32_t;

/// Malformed input: bad shapes, unreadable files, invalid parameters.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix that should be positive definite is not, or a value went non-finite.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Dense feature vectors, one per row, with optional class labels.
 *
 * This is the exchange type for all file formats and for the statistics
 * accumulator. Data is row-major so that a row is one contiguous sample.
 */
struct FeatureMatrix {
    RowMatrix data;
    std::optional<std::vector<ClassId>> labels;

    FeatureMatrix() = default;
    explicit FeatureMatrix(RowMatrix d) : data(std::move(d)) {}
    FeatureMatrix(RowMatrix d, std::vector<ClassId> l) : data(std::move(d)), labels(std::move(l)) {}

    Index rows() const { return data.rows(); }
    Index cols() const { return data.cols(); }
    bool has_labels() const { return labels.has_value(); }

    /// Throws InputError if cols < 1 or the label count disagrees with rows.
    void validate() const
    {
        if (data.cols() < 1)
            throw InputError("feature matrix must have at least one column");
        if (labels && static_cast<Index>(labels->size()) != data.rows())
            throw InputError("label count " + std::to_string(labels->size()) +
                             " does not match row count " + std::to_string(data.rows()));
    }
};

inline std::string shape_str(Index rows, Index cols)
{
    return std::to_string(rows) + "x" + std::to_string(cols);
}

} // namespace lrgda
