#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace map2seq {

// One JSON value per line; blank lines are skipped. Parse failures report
// the file and line number.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<nlohmann::ordered_json>& records);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::ordered_json& value);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

// Dataset record shared by references, rule-based text and model output.
struct InstructionRecord {
    std::string route_id;
    std::string instruction_text;

    friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

nlohmann::ordered_json to_json(const InstructionRecord& r);
InstructionRecord instruction_from_json(const nlohmann::json& j);

std::vector<InstructionRecord> read_instructions(const std::string& path);
void write_instructions(const std::string& path, const std::vector<InstructionRecord>& records);

}  // namespace map2seq
