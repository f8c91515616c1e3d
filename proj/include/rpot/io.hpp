#ifndef RPOT_IO_HPP
#define RPOT_IO_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rpot/estimators.hpp"
#include "rpot/region_generator.hpp"
#include "rpot/rjmcmc.hpp"
#include "rpot/study.hpp"

namespace rpot {

inline constexpr const char* kVersion = "0.1.0";

// Site data: one row per exceedance, columns site_id,area_km2,value (any
// column order).  Sites keep first-appearance order; a site's area must be
// identical on every one of its rows.  Errors carry file:line positions.
std::vector<SiteRecord> load_sites_csv(const std::filesystem::path& path);
void save_sites_csv(const std::filesystem::path& path,
                    std::span<const SiteRecord> sites);

// Retained chain states as iter,mu,sigma,xi,in_mass,log_post.
void write_trace_csv(const std::filesystem::path& path,
                     const ChainTrace& trace);

// estimator,p,point,lo,hi; the interval columns stay empty for estimators
// without one.
void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const QuantileEstimate> estimates);

// config,estimator,prob,nbias,sd,nmse,stderr.
void write_study_csv(const std::filesystem::path& path,
                     const std::string& config_name, const StudyResult& result);

// config,xi_fix,p_xi,r_shape,d_shape,mass_fraction,median_nbias,
// mean_ci_width,nbias,sd,nmse,k.
void write_sensitivity_csv(const std::filesystem::path& path,
                           const std::string& config_name,
                           const SensitivityResult& result);

// config,estimator,bias_c,nbias_q (slopes go to the manifest).
void write_bias_c_csv(const std::filesystem::path& path,
                      const std::string& config_name,
                      const BiasCResult& result);

// True parameters behind a generated region (sidecar for scoring).
void write_truth_json(const std::filesystem::path& path,
                      const SyntheticRegion& region);

// Run manifests: version, config echo, seed, timing, exclusion counts.
void write_study_manifest(const std::filesystem::path& path,
                          const StudyConfig& cfg, const StudyResult& result);
void write_sensitivity_manifest(const std::filesystem::path& path,
                                const StudyConfig& cfg,
                                const SensitivityResult& result,
                                const std::string& kind);
void write_bias_manifest(const std::filesystem::path& path,
                         const StudyConfig& cfg, const BiasCResult& result);
void write_generate_manifest(const std::filesystem::path& path,
                             const RegionConfig& cfg, std::uint64_t seed,
                             double wall_seconds);

// What a study config file asks for.  performance -> run_study,
// pxi/xifix -> the sensitivity sweeps, bias_c -> bias_c_analysis.
enum class StudyKind { performance, pxi, xifix, bias_c };

std::string to_string(StudyKind kind);

struct StudyPlan {
  StudyKind kind = StudyKind::performance;
  StudyConfig config;
  std::vector<double> p_grid;      // pxi and xifix sweeps
  std::vector<double> xifix_grid;  // xifix sweep only
  double probe_prob = 0.0;         // defaulted per kind when absent
};

// JSON mirrors of the config structs.  Unknown keys and type mismatches are
// reported with the JSON-pointer path of the offending member.  site_sizes
// accepts an array of length n_sites or a single integer applied to every
// pool site.
RegionConfig region_config_from_json_file(const std::filesystem::path& path);
StudyPlan study_plan_from_json_file(const std::filesystem::path& path);

}  // namespace rpot

#endif
