#pragma once

// Text -> parsed program -> traced graph -> tape, kept together.

#include "dcad/autodiff.hpp"
#include "dcad/dsl.hpp"
#include "dcad/error.hpp"
#include "dcad/interp.hpp"

#include <string>
#include <vector>

namespace dcad {

/// Program parsed but failed static validation.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<dsl::Diagnostic> diagnostics);
    const std::vector<dsl::Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<dsl::Diagnostic> diagnostics_;
};

struct CompiledModel {
    std::string text;
    dsl::Program program;
    /// Warnings only; errors throw.
    std::vector<dsl::Diagnostic> diagnostics;
    InterpResult interp;
    Tape tape;
    double interpret_seconds = 0.0;
    double lower_seconds = 0.0;

    const MeshTopology& topology() const { return interp.topology; }
    std::size_t num_params() const { return tape.num_params; }
    const std::vector<std::string>& param_names() const { return interp.param_names; }
    /// Parameter values declared in the text.
    std::vector<double> initial_params() const;
    int param_index(const std::string& name) const;
    std::vector<double> positions(std::span<const double> P) const;
    std::vector<double> constraint_values(std::span<const double> P) const;
};

/// Parse, validate, interpret and lower. Throws SyntaxError,
/// ValidationError or InterpError.
CompiledModel compile_model(std::string text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// Directory of the bundled example models.
std::string models_dir();
/// Reads and compiles models_dir()/relative.
CompiledModel load_bundled(const std::string& relative);

} // namespace dcad
