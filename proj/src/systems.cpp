#include "ct/systems.hpp"

#include <cctype>

#include "ct/extractive.hpp"

namespace ct {

const char* system_name(System s) {
  switch (s) {
    case System::SumBasic: return "SB";
    case System::Cisb: return "CISB";
    case System::Cag: return "CAG";
    case System::Cog: return "COG";
    case System::Cig: return "CIG";
    case System::Crg: return "CRG";
    case System::HybridCag: return "Hybrid-CAG";
    case System::HybridCig: return "Hybrid-CIG";
    case System::HybridCrg: return "Hybrid-CRG";
    case System::ExtractiveCag: return "Extractive-CAG";
    case System::ExtractiveCig: return "Extractive-CIG";
    case System::ExtractiveCrg: return "Extractive-CRG";
    case System::Oracle: return "Oracle";
  }
  return "?";
}

System parse_system(std::string_view s) {
  auto lower = [](std::string_view v) {
    std::string out(v);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const auto want = lower(s);
  for (auto sys : kAllSystems) {
    if (lower(system_name(sys)) == want) return sys;
  }
  throw std::invalid_argument("unknown system '" + std::string(s) + "'");
}

std::optional<nn::Variant> system_variant(System s) {
  using nn::Variant;
  switch (s) {
    case System::Cag:
    case System::HybridCag:
    case System::ExtractiveCag: return Variant::CAG;
    case System::Cog: return Variant::COG;
    case System::Cig:
    case System::HybridCig:
    case System::ExtractiveCig: return Variant::CIG;
    case System::Crg:
    case System::HybridCrg:
    case System::ExtractiveCrg: return Variant::CRG;
    default: return std::nullopt;
  }
}

nn::Example encode_instance(const BpeModel& bpe, const Instance& inst) {
  return {bpe.encode(tokenize(inst.document)), bpe.encode(tokenize(inst.context)), bpe.encode(tokenize(inst.update))};
}

std::string hybrid_document(const Instance& inst, std::size_t k) {
  auto doc = split_sentences(inst.document);
  auto ctx = split_sentences(inst.context);
  std::string out;
  for (auto i : cisb_top_k(doc, ctx, k)) {
    if (!out.empty()) out += ' ';
    out += sentence_text(inst.document, doc, i);
  }
  return out;
}

namespace {

const nn::Seq2SeqModel& model_for(const SystemResources& res, nn::Variant v) {
  auto it = res.models.find(v);
  if (it == res.models.end() || it->second == nullptr) {
    throw std::invalid_argument(std::string("no trained ") + nn::variant_name(v) + " model");
  }
  if (res.bpe == nullptr) throw std::invalid_argument("no BPE model");
  return *it->second;
}

std::string generate_text(const nn::Seq2SeqModel& model, const BpeModel& bpe, const Instance& inst,
                          const nn::DecodeOptions& opts) {
  auto ex = encode_instance(bpe, inst);
  auto src = nn::make_sources(model.config(), ex, true);
  auto ids = nn::generate(model, src, opts);
  return join(bpe.decode(ids));
}

}  // namespace

std::string run_system(System s, const Instance& inst, const SystemResources& res) {
  auto doc = split_sentences(inst.document);
  if (doc.empty()) return {};
  auto pick = [&](std::size_t i) { return join(doc.sentences[i]); };
  switch (s) {
    case System::SumBasic: return pick(sum_basic_select(doc).front().chosen);
    case System::Cisb: return pick(cisb_select(doc, split_sentences(inst.context)).chosen);
    case System::Oracle: return pick(oracle_select(doc, tokenize(inst.update)).chosen);
    case System::Cag:
    case System::Cog:
    case System::Cig:
    case System::Crg: {
      const auto& model = model_for(res, *system_variant(s));
      return generate_text(model, *res.bpe, inst, res.decode);
    }
    case System::HybridCag:
    case System::HybridCig:
    case System::HybridCrg: {
      const auto& model = model_for(res, *system_variant(s));
      Instance reduced = inst;
      reduced.document = hybrid_document(inst, res.hybrid_k);
      return generate_text(model, *res.bpe, reduced, res.decode);
    }
    case System::ExtractiveCag:
    case System::ExtractiveCig:
    case System::ExtractiveCrg: {
      const auto& model = model_for(res, *system_variant(s));
      auto src = nn::make_sources(model.config(), encode_instance(*res.bpe, inst), true);
      std::vector<IdSeq> candidates;
      candidates.reserve(doc.size());
      for (const auto& sent : doc.sentences) candidates.push_back(res.bpe->encode(sent));
      return pick(likelihood_rank(model, src, candidates).chosen);
    }
  }
  return {};
}

}  // namespace ct
