"""
Client and Server over a socket
===============================

The same protocol runs over newline-delimited JSON frames. A Server that
drops the connection is treated as asking for a redo; the Client
reconnects and resumes with fresh secrets.
"""

from vbqc.graph import greedy_colouring
from vbqc.library import builtin
from vbqc.protocol import ProtocolParams, RedoSettings, run_protocol
from vbqc.transport import (
    ProtocolServer,
    StreamSocketTransport,
    make_session_factory,
    run_protocol_remote,
)

p = builtin("five_vertex")
c = greedy_colouring(p.graph, p.order)
params = ProtocolParams(n=6, d=3, t=3, w=1, k=c.k)

server = ProtocolServer(("127.0.0.1", 0), make_session_factory(redo_rate=0.2, drop_on_redo=True))
server.start_background()
address = server.server_address[:2]
print("listening on", address)

try:
    for seed in range(3):
        verdict, trace, reconnects = run_protocol_remote(lambda: StreamSocketTransport(address), p, c, params,
                                                         (1, 0), seed)
        local, _ = run_protocol(p, c, params, (1, 0), None, seed, redo=RedoSettings(server_rate=0.2))
        print(f"seed {seed}: remote {verdict}, reconnects {reconnects}, in-process {local}")
finally:
    server.shutdown()
    server.server_close()
