#include "lormika/error.hpp"

namespace lormika {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::io_error: return "IoError";
        case ErrorCode::schema_mismatch: return "SchemaMismatch";
        case ErrorCode::unknown_category: return "UnknownCategory";
        case ErrorCode::empty_file: return "EmptyFile";
        case ErrorCode::target_not_found: return "TargetNotFound";
        case ErrorCode::empty_table: return "EmptyTable";
        case ErrorCode::all_missing_column: return "AllMissingColumn";
        case ErrorCode::length_mismatch: return "LengthMismatch";
        case ErrorCode::non_positive_width: return "NonPositiveWidth";
        case ErrorCode::empty_class: return "EmptyClass";
        case ErrorCode::empty_training_set: return "EmptyTrainingSet";
        case ErrorCode::too_few_parents: return "TooFewParents";
        case ErrorCode::invalid_fraction: return "InvalidFraction";
        case ErrorCode::endpoint_unreachable: return "EndpointUnreachable";
        case ErrorCode::protocol_error: return "ProtocolError";
        case ErrorCode::prediction_count_mismatch: return "PredictionCountMismatch";
        case ErrorCode::single_class_training: return "SingleClassTraining";
        case ErrorCode::empty_data: return "EmptyData";
        case ErrorCode::zero_coverage: return "ZeroCoverage";
        case ErrorCode::no_categorical_columns: return "NoCategoricalColumns";
        case ErrorCode::negative_lift: return "NegativeLift";
        case ErrorCode::invalid_config: return "InvalidConfig";
    }
    return "Error";
}

ErrorKind kind_of(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::endpoint_unreachable:
        case ErrorCode::protocol_error:
        case ErrorCode::prediction_count_mismatch:
            return ErrorKind::endpoint;
        case ErrorCode::invalid_config:
        case ErrorCode::non_positive_width:
        case ErrorCode::invalid_fraction:
        case ErrorCode::negative_lift:
            return ErrorKind::config;
        default:
            return ErrorKind::data;
    }
}

}  // namespace lormika
