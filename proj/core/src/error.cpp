#include "sdg/error.hpp"

namespace sdg {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingField: return "MissingField";
    case Errc::TypeMismatch: return "TypeMismatch";
    case Errc::CrossFieldViolation: return "CrossFieldViolation";
    case Errc::UnknownPath: return "UnknownPath";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyOutput: return "EmptyOutput";
    case Errc::BadSource: return "BadSource";
    case Errc::DanglingImageRef: return "DanglingImageRef";
    case Errc::IoError: return "IoError";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::Precondition: return "Precondition";
    case Errc::Cancelled: return "Cancelled";
    case Errc::NotFound: return "NotFound";
    case Errc::AuthError: return "AuthError";
    case Errc::TransportError: return "TransportError";
    case Errc::ResponseFormatError: return "ResponseFormatError";
    case Errc::NoJsonFound: return "NoJsonFound";
    case Errc::UnbalancedJson: return "UnbalancedJson";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyQueryAfterTokenization: return "EmptyQueryAfterTokenization";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::DatasetGated: return "DatasetGated";
    case Errc::SplitNotFound: return "SplitNotFound";
    case Errc::KeywordExtractionEmpty: return "KeywordExtractionEmpty";
    case Errc::SeedFileInvalid: return "SeedFileInvalid";
    case Errc::TeacherUnreachable: return "TeacherUnreachable";
    case Errc::NoPassagesFound: return "NoPassagesFound";
    case Errc::FieldSelectionFailed: return "FieldSelectionFailed";
    case Errc::PatternExtractionFailed: return "PatternExtractionFailed";
    case Errc::GenerationParseFailure: return "GenerationParseFailure";
    case Errc::AllSamplesInvalid: return "AllSamplesInvalid";
    case Errc::CheckpointCorrupt: return "CheckpointCorrupt";
    case Errc::RunIdMismatch: return "RunIdMismatch";
    case Errc::UnreadableImage: return "UnreadableImage";
    case Errc::EvaluationFailed: return "EvaluationFailed";
    case Errc::JudgeParseError: return "JudgeParseError";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::SpawnFailure: return "SpawnFailure";
    case Errc::NonZeroExit: return "NonZeroExit";
    case Errc::IllegalTransition: return "IllegalTransition";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

}  // namespace sdg
