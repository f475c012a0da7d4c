#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ct/bpe.hpp"
#include "ct/dataset.hpp"
#include "ct/seq2seq.hpp"

namespace ct {

/// Every row of the comparison table.
enum class System {
  SumBasic,
  Cisb,
  Cag,
  Cog,
  Cig,
  Crg,
  HybridCag,
  HybridCig,
  HybridCrg,
  ExtractiveCag,
  ExtractiveCig,
  ExtractiveCrg,
  Oracle,
};

inline constexpr System kAllSystems[] = {
    System::SumBasic,      System::Cisb,          System::Cag,           System::Cog,      System::Cig,
    System::Crg,           System::HybridCag,     System::HybridCig,     System::HybridCrg, System::ExtractiveCag,
    System::ExtractiveCig, System::ExtractiveCrg, System::Oracle,
};

const char* system_name(System s);
/// Case-insensitive; accepts the names system_name() prints ("Hybrid-CIG").
System parse_system(std::string_view s);

/// The trained variant a system depends on, if any.
std::optional<nn::Variant> system_variant(System s);

/// BPE ids of one instance (update as target).
nn::Example encode_instance(const BpeModel& bpe, const Instance& inst);

struct SystemResources {
  const BpeModel* bpe = nullptr;
  std::map<nn::Variant, const nn::Seq2SeqModel*> models;
  nn::DecodeOptions decode;
  std::size_t hybrid_k = 5;
};

/// Document restricted to its top-k CISB sentences, in document order.
std::string hybrid_document(const Instance& inst, std::size_t k);

/// The system's update for one instance as space-joined word tokens. Empty
/// when the document has no sentences.
std::string run_system(System s, const Instance& inst, const SystemResources& res);

}  // namespace ct
