#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "metaleap/episode.hpp"

namespace metaleap {

/// One JSON object per line:
/// {"word": s, "contexts": [[...]...], "target": [...]|null, "probes": [[...]...]|null,
///  "gold": [...]|null}
/// plus an optional "informativeness" number. Records without probes come back
/// with an empty probe matrix. All vectors in a file must share one dimension.
std::vector<ChimeraEpisode> read_episodes_jsonl(std::istream& in);
std::vector<ChimeraEpisode> load_episodes_jsonl(const std::string& path);

void write_episodes_jsonl(std::ostream& out, const std::vector<ChimeraEpisode>& episodes);

inline bool has_probes(const ChimeraEpisode& e) { return !e.gold.empty(); }

}  // namespace metaleap
