"""contextdesk: context-space desktop service that tidies itself up.

Information items live in a small property graph, are associated with
user contexts, get served to ordinary applications over WebDAV/IMAP
facades, and are continuously tidied up by an escalating forgetting
engine.  The sidebar HTTP+SSE API is the single interaction point.
"""

__version__ = "0.1.0"
