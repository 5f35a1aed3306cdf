#include "betaunc/errors.hpp"

namespace betaunc {

const char* to_string(DataErrorCode code) {
    switch (code) {
        case DataErrorCode::MissingFile: return "missing file";
        case DataErrorCode::Io: return "i/o error";
        case DataErrorCode::MalformedHeader: return "malformed header";
        case DataErrorCode::NonMonotoneChangepoints: return "non-monotone changepoints";
        case DataErrorCode::InvalidRecord: return "invalid record";
        case DataErrorCode::CorruptCheckpoint: return "corrupt checkpoint";
        case DataErrorCode::UnsupportedVersion: return "unsupported version";
        case DataErrorCode::ShapeMismatch: return "shape mismatch";
        case DataErrorCode::UnknownRecord: return "unknown record";
    }
    return "data error";
}

}  // namespace betaunc
