#include "synprobe/treebank.hpp"

#include <charconv>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "synprobe/error.hpp"
#include "synprobe/log.hpp"

namespace synprobe {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_int(std::string_view s, int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

SentenceParse::SentenceParse(std::string id, std::string text, std::vector<Token> tokens)
    : id_(std::move(id)), text_(std::move(text)), tokens_(std::move(tokens)) {
  const int n = static_cast<int>(tokens_.size());
  if (tokens_.size() > kMaxSentenceLength) {
    throw StructureError("sentence " + id_ + ": " + std::to_string(n) +
                         " tokens exceeds the limit of " +
                         std::to_string(kMaxSentenceLength));
  }
  for (int i = 0; i < n; ++i) {
    const Token& t = tokens_[i];
    if (t.index != i + 1) {
      throw StructureError("sentence " + id_ + ": token indices are not contiguous at " +
                           std::to_string(t.index));
    }
    if (t.head < 0 || t.head > n || t.head == t.index) {
      throw StructureError("sentence " + id_ + ": token " + std::to_string(t.index) +
                           " has invalid head " + std::to_string(t.head));
    }
    if (t.head == 0) {
      ++root_count_;
    } else {
      gold_arcs_.push_back({t.index, t.head});
    }
  }

  // Every token must reach ROOT by following heads; otherwise there is a cycle.
  std::vector<int> state(n + 1, 0);  // 0 unvisited, 1 on current path, 2 done
  state[0] = 2;
  for (int start = 1; start <= n; ++start) {
    std::vector<int> path;
    int cur = start;
    while (state[cur] == 0) {
      state[cur] = 1;
      path.push_back(cur);
      cur = tokens_[cur - 1].head;
    }
    if (state[cur] == 1) {
      throw StructureError("sentence " + id_ + ": cyclic head assignment through token " +
                           std::to_string(cur));
    }
    for (int v : path) state[v] = 2;
  }
  if (n > 0 && root_count_ != 1) {
    log_warning("sentence " + id_ + " has " + std::to_string(root_count_) +
                " root attachments; distances between root subtrees pass through ROOT");
  }

  // BFS from each token over the undirected tree. Node 0 is ROOT, which only
  // matters for multi-rooted input.
  std::vector<std::vector<int>> adj(n + 1);
  for (const Token& t : tokens_) {
    adj[t.index].push_back(t.head);
    adj[t.head].push_back(t.index);
  }
  distances_.assign(static_cast<std::size_t>(n) * n, 0);
  std::vector<int> dist(n + 1);
  std::deque<int> queue;
  for (int src = 1; src <= n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[src] = 0;
    queue.assign(1, src);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          queue.push_back(v);
        }
      }
    }
    for (int dst = 1; dst <= n; ++dst) {
      distances_[static_cast<std::size_t>(src - 1) * n + (dst - 1)] =
          static_cast<std::uint16_t>(dist[dst]);
    }
  }
}

std::vector<UndirectedEdge> SentenceParse::gold_edges() const {
  std::vector<UndirectedEdge> edges;
  edges.reserve(gold_arcs_.size());
  for (const auto& arc : gold_arcs_) edges.push_back(UndirectedEdge::of(arc.child, arc.head));
  return edges;
}

std::vector<bool> SentenceParse::punct_mask() const {
  std::vector<bool> mask;
  mask.reserve(tokens_.size());
  for (const auto& t : tokens_) mask.push_back(t.is_punct);
  return mask;
}

std::vector<std::string> SentenceParse::forms() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const auto& t : tokens_) out.push_back(t.form);
  return out;
}

std::vector<SentenceParse> parse_conllu(std::string_view text) {
  std::vector<SentenceParse> out;
  std::vector<Token> tokens;
  std::string sent_id;
  std::string sent_text;
  std::map<std::string, std::string> meta;
  bool in_sentence = false;

  auto flush = [&] {
    if (!in_sentence) return;
    std::string id = sent_id.empty() ? std::to_string(out.size()) : sent_id;
    if (!tokens.empty()) {
      out.emplace_back(std::move(id), std::move(sent_text), std::move(tokens));
      out.back().set_metadata(std::move(meta));
    }
    tokens.clear();
    meta.clear();
    sent_id.clear();
    sent_text.clear();
    in_sentence = false;
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim_cr(raw);

    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      continue;
    }
    in_sentence = true;
    if (line.front() == '#') {
      auto kv = line.substr(1);
      const auto eq = kv.find('=');
      if (eq != std::string_view::npos) {
        auto key = kv.substr(0, eq);
        auto val = kv.substr(eq + 1);
        while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
        while (!key.empty() && key.back() == ' ') key.remove_suffix(1);
        while (!val.empty() && val.front() == ' ') val.remove_prefix(1);
        if (key == "sent_id") sent_id = std::string(val);
        if (key == "text") sent_text = std::string(val);
        meta[std::string(key)] = std::string(val);
      }
      continue;
    }

    const auto fields = split_tabs(line);
    if (fields.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(fields.size()),
                       line_no);
    }
    const auto id_field = fields[0];
    if (id_field.find('-') != std::string_view::npos || id_field.find('.') != std::string_view::npos) {
      continue;  // multiword range or empty node
    }
    Token tok;
    if (!parse_int(id_field, tok.index)) throw ParseError("bad token id '" + std::string(id_field) + "'", line_no);
    if (!parse_int(fields[6], tok.head)) throw ParseError("bad head '" + std::string(fields[6]) + "'", line_no);
    tok.form = std::string(fields[1]);
    tok.upos = std::string(fields[3]);
    tok.xpos = std::string(fields[4]);
    tok.deprel = std::string(fields[7]);
    tok.is_punct = tok.upos == "PUNCT";
    if (tok.index != static_cast<int>(tokens.size()) + 1) {
      throw ParseError("token id " + std::to_string(tok.index) + " is not contiguous", line_no);
    }
    tokens.push_back(std::move(tok));
  }
  flush();
  return out;
}

std::vector<SentenceParse> read_conllu_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open CoNLL-U file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_conllu(buf.str());
}

std::string write_conllu(std::span<const SentenceParse> parses) {
  std::ostringstream out;
  for (const auto& p : parses) {
    out << "# sent_id = " << p.id() << '\n';
    if (!p.text().empty()) out << "# text = " << p.text() << '\n';
    for (const auto& [key, val] : p.metadata()) {
      if (key != "sent_id" && key != "text") out << "# " << key << " = " << val << '\n';
    }
    for (const auto& t : p.tokens()) {
      out << t.index << '\t' << t.form << "\t_\t" << t.upos << '\t' << t.xpos << "\t_\t" << t.head << '\t'
          << t.deprel << "\t_\t_\n";
    }
    out << '\n';
  }
  return out.str();
}

int tree_distance(const SentenceParse& parse, int i, int j) { return parse.distance(i, j); }

std::vector<std::pair<int, int>> same_xpos_pairs(const SentenceParse& parse) {
  std::vector<std::pair<int, int>> pairs;
  const auto& toks = parse.tokens();
  for (std::size_t i = 0; i < toks.size(); ++i) {
    for (std::size_t j = i + 1; j < toks.size(); ++j) {
      if (toks[i].xpos == toks[j].xpos) pairs.emplace_back(toks[i].index, toks[j].index);
    }
  }
  return pairs;
}

}  // namespace synprobe
