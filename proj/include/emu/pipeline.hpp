#pragma once
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emu/core.hpp"
#include "emu/model.hpp"

namespace emu::pipe {

// Minimal INI-style config: [section] headers, key = value lines, '#'
// comments.  Typed accessors raise ValidationError with the offending
// section/key in the message.
class IniConfig {
 public:
  static IniConfig parse_file(const std::string& path);
  static IniConfig parse_text(const std::string& text,
                              const std::string& origin = "<inline>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key,
                      std::optional<std::string> fallback = {}) const;
  long get_int(const std::string& section, const std::string& key,
               std::optional<long> fallback = {}) const;
  double get_num(const std::string& section, const std::string& key,
                 std::optional<double> fallback = {}) const;
  Vector get_vec(const std::string& section, const std::string& key,
                 std::optional<Vector> fallback = {}) const;

  const std::string& text() const { return text_; }
  std::uint64_t text_hash() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
  std::string text_, origin_;
};

// Everything a stage needs: parsed config, resolved output directory,
// per-stage seed and worker count (command-line overrides already applied).
struct StageContext {
  IniConfig config;
  std::string out_dir;
  std::string model_kind;  // "ergm" | "pointproc"
  std::uint64_t master_seed = 0;
  std::optional<std::uint64_t> seed_override;
  int workers = 1;

  std::uint64_t seed_for(const std::string& stage) const;
  std::string path(const std::string& file) const;
};

StageContext make_context(const std::string& config_path,
                          std::optional<std::uint64_t> stage_seed,
                          std::optional<int> workers,
                          std::optional<std::string> out_dir);

// Model + observed-data bundle shared by the stages.
struct ModelBundle {
  std::unique_ptr<Model> model;
  BoxDomain prior;
};
ModelBundle build_model(const StageContext& ctx);
DataPtr load_observed(const StageContext& ctx, const Model& model);

// Pipeline stages; each writes its outputs plus a JSON manifest into the
// output directory and throws ValidationError / NumericalError on failure.
void cmd_simulate(const StageContext& ctx);
void cmd_particles(const StageContext& ctx);
void cmd_precompute(const StageContext& ctx);
void cmd_run(const StageContext& ctx);
void cmd_diagnose(const StageContext& ctx);
void cmd_bench(const StageContext& ctx);

}  // namespace emu::pipe
