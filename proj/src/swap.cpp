#include "roost/swap.hpp"

#include <map>

namespace roost {

namespace {

Bytes encode_u32(std::uint32_t v) {
  ByteWriter w;
  w.put(v);
  return w.take();
}

std::uint32_t decode_u32(const Bytes& b) {
  ByteReader r(b);
  const auto v = r.get<std::uint32_t>();
  if (!r.done()) throw ProtocolError("swap: unexpected trailing bytes in index message");
  return v;
}

Bytes encode_f64(double v) {
  ByteWriter w;
  w.put(v);
  return w.take();
}

double decode_f64(const Bytes& b) {
  ByteReader r(b);
  const auto v = r.get<double>();
  if (!r.done()) throw ProtocolError("swap: unexpected trailing bytes in log-ratio message");
  return v;
}

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::vector<SwapDecision> communicate(std::span<Replica> local, std::uint64_t t, SwapContext& ctx) {
  Transport& net = ctx.transport;
  PermutedDistributedArray& dir = ctx.directory;
  const int n = ctx.schedule.n_chains();
  const int me = net.rank();
  if (dir.size() != n) throw ProtocolError("communicate: directory and schedule sizes differ");

  std::vector<RequestHandle> sends;
  const std::uint64_t s1 = protocol_step(t, phase::kDirectoryExchange);
  const std::uint64_t s2 = protocol_step(t, phase::kDirectoryReply);
  const std::uint64_t s3 = protocol_step(t, phase::kLogRatio);
  const std::uint64_t s4 = protocol_step(t, phase::kChainExchange);
  const std::uint64_t s5 = protocol_step(t, phase::kDirectorySet);

  // 1. Directory owners of paired entries swap their entries.
  std::map<int, int> partner_holder_of_entry;  // local entry j -> holder of partner(j)
  for (int j = dir.first_index(); j < dir.end_index(); ++j)
    if (auto p = swap_partner(j, t, n))
      sends.push_back(net.send(dir.owner_of(*p), tag(s1, u32(j), u32(me)), encode_u32(u32(dir.get(j)))));
  for (int j = dir.first_index(); j < dir.end_index(); ++j)
    if (auto p = swap_partner(j, t, n)) {
      const int from = dir.owner_of(*p);
      partner_holder_of_entry[j] = static_cast<int>(decode_u32(net.receive(from, tag(s1, u32(*p), u32(from)))));
    }

  // 2. Each owner tells the holder of its chain where the partner chain is.
  for (const auto& [j, partner_holder] : partner_holder_of_entry)
    sends.push_back(net.send(dir.get(j), tag(s2, u32(j), u32(me)), encode_u32(u32(partner_holder))));

  struct Pending {
    Replica* replica;
    int chain;
    int partner;
    int partner_holder;
    double contribution = 0.0;
    bool accepted = false;
  };
  std::vector<Pending> active;
  for (auto& r : local) {
    if (auto p = swap_partner(r.chain, t, n)) {
      const int owner = dir.owner_of(r.chain);
      const int holder = static_cast<int>(decode_u32(net.receive(owner, tag(s2, u32(r.chain), u32(owner)))));
      if (holder < 1 || holder > net.size())
        throw ProtocolError("communicate: directory reply names rank " + std::to_string(holder));
      active.push_back({&r, r.chain, *p, holder});
    }
  }

  // 3. Exchange one log-ratio contribution per side.
  for (auto& a : active) {
    const auto x = std::span<const double>(a.replica->state);
    const double own = ctx.path.log_density(ctx.schedule.beta(a.chain), x);
    const double other = ctx.path.log_density(ctx.schedule.beta(a.partner), x);
    a.contribution = swap_log_ratio_contribution(other, own);
    sends.push_back(net.send(a.partner_holder, tag(s3, u32(a.chain), u32(me)), encode_f64(a.contribution)));
  }

  std::vector<SwapDecision> decisions;
  for (auto& a : active) {
    const double theirs =
        decode_f64(net.receive(a.partner_holder, tag(s3, u32(a.partner), u32(a.partner_holder))));
    const bool lower = a.chain < a.partner;
    double alpha = swap_alpha_from_contributions(lower ? a.contribution : theirs,
                                                 lower ? theirs : a.contribution);
    if (ctx.forced_alpha) alpha = *ctx.forced_alpha;
    const int lower_chain = lower ? a.chain : a.partner;
    a.accepted = shared_uniform(ctx.seed, t, static_cast<std::uint64_t>(lower_chain)) < alpha;
    if (lower) {
      decisions.push_back({t, lower_chain, a.accepted, alpha});
      a.replica->recorders.pairs.at(static_cast<std::size_t>(lower_chain - 1)).add(alpha);
    }
  }

  // 4. Accepted pairs exchange chain indices.
  for (const auto& a : active)
    if (a.accepted)
      sends.push_back(net.send(a.partner_holder, tag(s4, u32(a.chain), u32(me)), encode_u32(u32(a.chain))));
  for (auto& a : active)
    if (a.accepted) {
      const auto got = decode_u32(net.receive(a.partner_holder, tag(s4, u32(a.partner), u32(a.partner_holder))));
      if (static_cast<int>(got) != a.partner)
        throw ProtocolError("communicate: expected chain " + std::to_string(a.partner) + ", got " +
                            std::to_string(got));
      a.replica->chain = a.partner;
    }

  // 5. Former holders report the new holder of each paired chain.
  for (const auto& a : active) {
    const int new_holder = a.accepted ? a.partner_holder : me;
    sends.push_back(net.send(dir.owner_of(a.chain), tag(s5, u32(a.chain), u32(me)), encode_u32(u32(new_holder))));
  }
  for (const auto& [j, partner_holder] : partner_holder_of_entry) {
    const int old_holder = dir.get(j);
    const auto holder = decode_u32(net.receive(old_holder, tag(s5, u32(j), u32(old_holder))));
    if (holder != u32(old_holder) && holder != u32(partner_holder))
      throw ProtocolError("communicate: chain " + std::to_string(j) + " reported at rank " +
                          std::to_string(holder) + ", which took no part in its swap");
    permuted_set(dir, j, static_cast<int>(holder), s5);
  }

  net.waitall(sends);
  return decisions;
}

std::vector<int> gather_directory(Transport& transport, const PermutedDistributedArray& directory,
                                  std::uint64_t step) {
  const int me = transport.rank();
  std::vector<RequestHandle> sends;
  if (me != 1) {
    ByteWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(directory.local_slice().size()));
    for (int h : directory.local_slice()) w.put<std::uint32_t>(u32(h));
    transport.send(1, tag(step, 0, u32(me)), w.take()).wait();
    return {};
  }
  std::vector<int> full(directory.local_slice().begin(), directory.local_slice().end());
  for (int r = 2; r <= transport.size(); ++r) {
    const Bytes b = transport.receive(r, tag(step, 0, u32(r)));
    ByteReader rd(b);
    const auto count = rd.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < count; ++k) full.push_back(static_cast<int>(rd.get<std::uint32_t>()));
  }
  if (static_cast<int>(full.size()) != directory.size())
    throw ProtocolError("gather_directory: assembled " + std::to_string(full.size()) +
                        " entries, expected " + std::to_string(directory.size()));
  return full;
}

}  // namespace roost
