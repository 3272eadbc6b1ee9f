#pragma once

// Fold-level test QWK reference matrix used by the aggregation tests: 15
// (trait, fold) rows x 9 variant columns, plus the published per-trait means
// the aggregation code must reproduce.

#include <array>
#include <string>
#include <vector>

#include "traitscore/protocol.hpp"

namespace tabledata {

inline const std::array<std::string, 9> kVariantColumns = {
    "baseline",        "warm_small_std",  "warm_small_1ep",
    "fusion_small_std", "fusion_small_1ep", "warm_large_std",
    "warm_large_1ep",  "fusion_large_std", "fusion_large_1ep"};

struct Row {
  const char* trait;
  const char* fold;
  std::array<double, 9> qwk;
};

inline const std::vector<Row> kFoldMatrix = {
    {"grammar", "E", {0.6556, 0.6116, 0.6421, 0.6073, 0.6738, 0.6009, 0.6657, 0.6311, 0.6597}},
    {"grammar", "A", {0.7085, 0.6816, 0.6964, 0.6896, 0.7065, 0.6941, 0.7010, 0.6910, 0.6942}},
    {"grammar", "B", {0.6761, 0.6380, 0.6812, 0.6645, 0.6524, 0.6506, 0.6506, 0.6672, 0.6646}},
    {"grammar", "C", {0.6563, 0.6960, 0.6960, 0.6980, 0.6980, 0.6576, 0.6576, 0.6772, 0.6772}},
    {"grammar", "D", {0.6982, 0.6749, 0.6520, 0.6573, 0.6813, 0.6478, 0.6869, 0.6391, 0.6391}},
    {"vocabulary", "E", {0.6151, 0.5985, 0.6409, 0.5982, 0.5909, 0.5985, 0.5706, 0.5500, 0.5795}},
    {"vocabulary", "A", {0.6311, 0.6157, 0.6338, 0.5724, 0.6349, 0.6151, 0.6251, 0.5724, 0.6289}},
    {"vocabulary", "B", {0.6226, 0.5653, 0.5653, 0.6231, 0.6231, 0.5653, 0.6000, 0.5975, 0.5975}},
    {"vocabulary", "C", {0.6131, 0.6116, 0.6158, 0.5900, 0.6196, 0.6177, 0.6158, 0.6397, 0.6397}},
    {"vocabulary", "D", {0.5882, 0.5886, 0.6201, 0.5734, 0.6299, 0.5886, 0.5886, 0.6002, 0.5638}},
    {"syntax", "E", {0.6418, 0.6223, 0.6223, 0.6223, 0.6223, 0.6251, 0.6387, 0.6251, 0.6251}},
    {"syntax", "A", {0.6497, 0.6881, 0.6778, 0.6881, 0.6778, 0.6769, 0.6443, 0.6769, 0.6443}},
    {"syntax", "B", {0.6217, 0.6169, 0.6066, 0.6150, 0.6066, 0.6275, 0.6275, 0.6169, 0.6275}},
    {"syntax", "C", {0.6895, 0.6313, 0.6378, 0.6313, 0.6698, 0.6698, 0.6452, 0.6452, 0.6452}},
    {"syntax", "D", {0.6344, 0.5943, 0.5943, 0.5788, 0.5821, 0.6491, 0.5943, 0.6491, 0.6491}},
};

// Published per-trait means, in the same column order as kVariantColumns.
inline const std::vector<std::pair<std::string, std::array<double, 9>>>
    kTraitMeans = {
        {"grammar", {0.6789, 0.6604, 0.6735, 0.6633, 0.6824, 0.6502, 0.6724, 0.6611, 0.6670}},
        {"vocabulary", {0.6140, 0.5959, 0.6152, 0.5914, 0.6197, 0.5970, 0.6000, 0.5920, 0.6019}},
        {"syntax", {0.6474, 0.6306, 0.6278, 0.6271, 0.6317, 0.6497, 0.6300, 0.6426, 0.6382}},
};

// Assembles the 135-record table in the shape the aggregation ops consume.
inline traitscore::ResultTable reference_table() {
  traitscore::ResultTable table;
  for (const Row& row : kFoldMatrix) {
    for (std::size_t c = 0; c < kVariantColumns.size(); ++c) {
      traitscore::RunRecord r;
      r.trait = row.trait;
      r.fold = row.fold;
      r.variant = traitscore::VariantSpec::parse(kVariantColumns[c]);
      r.test_qwk = row.qwk[c];
      r.has_stage1 = r.variant.uses_artifact();
      table.records.push_back(std::move(r));
    }
  }
  return table;
}

inline traitscore::ProtocolConfig reference_config() {
  traitscore::ProtocolConfig cfg;  // defaults match the reference protocol
  return cfg;
}

}  // namespace tabledata
