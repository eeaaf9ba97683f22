#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "echoseg/gradcheck.hpp"
#include "echoseg/phantom.hpp"
#include "echoseg/pipeline.hpp"

namespace echoseg {

inline constexpr const char* kToolName = "echoseg";
inline constexpr const char* kToolVersion = "0.1.0";

nlohmann::json to_json(const MetricSummary& m);
nlohmann::json to_json(const LossBreakdown& l);
nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const TrainHistory& h);
nlohmann::json to_json(const BenchReport& b);
nlohmann::json to_json(const GradCheckReport& g);
nlohmann::json to_json(const std::vector<GradCheckReport>& reports);
nlohmann::json to_json(const UNetConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const PhantomConfig& c);

/// {"tool", "version", "command", "config", "result"}
nlohmann::json make_report(const std::string& command, nlohmann::json config, nlohmann::json result);

/// Throws ValidationError if any number in the document is not finite.
void require_finite(const nlohmann::json& doc);

/// Pretty-printed JSON; rejects non-finite numbers.
void write_report(const std::filesystem::path& path, const nlohmann::json& report);

}  // namespace echoseg
