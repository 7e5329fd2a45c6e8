#pragma once

#include <cstddef>
#include <functional>

namespace matchgraph {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work items are
/// handed out in index order; callers that need deterministic output write
/// results into slot i and reduce afterwards in index order.
/// threads == 0 means std::thread::hardware_concurrency().
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace matchgraph
