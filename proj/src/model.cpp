#include "dcad/model.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace dcad {

namespace {

std::string summarize(const std::vector<dsl::Diagnostic>& ds) {
    std::string s;
    for (const auto& d : ds) {
        if (d.severity != dsl::Diagnostic::Severity::Error) continue;
        if (!s.empty()) s += "; ";
        s += std::to_string(d.line) + ":" + std::to_string(d.col) + ": " + d.message;
    }
    return s.empty() ? "invalid program" : s;
}

} // namespace

ValidationError::ValidationError(std::vector<dsl::Diagnostic> diagnostics)
    : Error(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::vector<double> CompiledModel::initial_params() const {
    std::vector<double> p;
    for (const auto& d : program.params) p.push_back(d.initial);
    return p;
}

int CompiledModel::param_index(const std::string& name) const { return program.param_index(name); }

std::vector<double> CompiledModel::positions(std::span<const double> P) const {
    return eval_tape(tape, P).vertices;
}

std::vector<double> CompiledModel::constraint_values(std::span<const double> P) const {
    return eval_tape(tape, P).constraints;
}

CompiledModel compile_model(std::string text) {
    using Clock = std::chrono::steady_clock;
    CompiledModel m;
    m.text = std::move(text);
    m.program = dsl::parse(m.text);
    m.diagnostics = dsl::validate(m.program);
    if (dsl::has_errors(m.diagnostics)) throw ValidationError(m.diagnostics);
    const auto t0 = Clock::now();
    m.interp = interpret(m.program);
    const auto t1 = Clock::now();
    m.tape = lower(m.interp.graph);
    const auto t2 = Clock::now();
    m.interpret_seconds = std::chrono::duration<double>(t1 - t0).count();
    m.lower_seconds = std::chrono::duration<double>(t2 - t1).count();
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << contents;
    if (!out) throw Error("write failed: " + path);
}

std::string models_dir() {
#ifdef DCAD_MODELS_DIR
    return DCAD_MODELS_DIR;
#else
    return "models";
#endif
}

CompiledModel load_bundled(const std::string& relative) {
    return compile_model(read_file(models_dir() + "/" + relative));
}

} // namespace dcad
