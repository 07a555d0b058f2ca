"""radledger: a signed, replicated ledger of radiological investigations.

Raw machine outputs (DAP, DLP) become effective doses; every investigation is
an immutable signed record replicated across patient-card, local, and central
stores; clinicians read histories, cumulative doses, what-if projections and
regulatory reports from any reachable replica.
"""

__version__ = "0.1.0"
