#pragma once

#include <stdexcept>
#include <string>

namespace walklab {

inline constexpr const char* version_string = "0.1.0";

// Error taxonomy shared by the library and the CLI. Spec-construction
// problems map to CLI exit code 2, everything else to exit code 3.
enum class Errc {
    invalid_spec,
    bad_argument,
    incompatible_mechanism,
    too_large_instance,
    zero_survival,
    too_few_survivors,
    step_cap_exhausted,
    provider_out_of_range,
    io_error,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_spec: return "invalid-spec";
        case Errc::bad_argument: return "bad-argument";
        case Errc::incompatible_mechanism: return "incompatible-mechanism";
        case Errc::too_large_instance: return "too-large-instance";
        case Errc::zero_survival: return "zero-survival";
        case Errc::too_few_survivors: return "too-few-survivors";
        case Errc::step_cap_exhausted: return "step-cap-exhaustion";
        case Errc::provider_out_of_range: return "u-provider-out-of-range";
        case Errc::io_error: return "io-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }
    bool is_config_error() const noexcept {
        return code_ == Errc::invalid_spec || code_ == Errc::bad_argument;
    }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

}  // namespace walklab
