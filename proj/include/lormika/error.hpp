#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lormika {

enum class ErrorCode {
    io_error,
    schema_mismatch,
    unknown_category,
    empty_file,
    target_not_found,
    empty_table,
    all_missing_column,
    length_mismatch,
    non_positive_width,
    empty_class,
    empty_training_set,
    too_few_parents,
    invalid_fraction,
    endpoint_unreachable,
    protocol_error,
    prediction_count_mismatch,
    single_class_training,
    empty_data,
    zero_coverage,
    no_categorical_columns,
    negative_lift,
    invalid_config,
};

/// Coarse grouping used by the command line to pick an exit status.
enum class ErrorKind { config, data, endpoint };

std::string_view to_string(ErrorCode code) noexcept;
ErrorKind kind_of(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_of(code_); }

private:
    ErrorCode code_;
};

}  // namespace lormika
