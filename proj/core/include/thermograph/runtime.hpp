#pragma once

namespace thermograph {

/// Keeps freed large blocks in the heap instead of returning them to the OS.
/// Training allocates and drops tens of MB per iteration; without this the
/// page faults cost as much as the arithmetic. No-op outside glibc.
void retain_heap_memory();

}  // namespace thermograph
