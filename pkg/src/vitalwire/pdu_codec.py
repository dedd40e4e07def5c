"""SMS frame codec for PDU-mode modems.

Builds and parses SMS-SUBMIT frames as uppercase hex strings: 7-bit septet
packing of the message body, swapped semi-octet rendering of the destination
number, and the length argument required by ``AT+CMGS``. The alphabet is the
identity mapping over the 7-bit ASCII range: every character with code point
below 128 is one septet, and bodies are capped at 160 septets (no
concatenation).
"""

from __future__ import annotations

import string
from dataclasses import dataclass

MAX_SEPTETS = 160
MAX_ADDRESS_DIGITS = 20

# Fixed frame fields: no SMSC in the frame, SMS-SUBMIT without extras,
# modem-assigned message reference, "international" address marker, default
# protocol id and 7-bit coding scheme.
SMSC_INFO_OCTET = 0x00
FIRST_OCTET = 0x01
MESSAGE_REF = 0x00
DA_TYPE = 0x81
PROTOCOL_ID = 0x00
DATA_CODING = 0x00


class PduError(ValueError):
    """Base class for frame encode/decode failures."""


class InvalidAlphabetError(PduError):
    """Text contains a character outside the 7-bit range."""


class MessageTooLongError(PduError):
    """Text exceeds the 160-septet cap."""


class InvalidNumberError(PduError):
    """Destination is not a 1-20 digit decimal string."""


class MalformedPayloadError(PduError):
    """Byte payload or hex string is structurally inconsistent."""


def ensure_gsm7_text(text: str) -> str:
    """Validate *text* as a message body: all code points < 128, at most 160."""
    for ch in text:
        if ord(ch) >= 128:
            raise InvalidAlphabetError(
                f"character {ch!r} (U+{ord(ch):04X}) is not 7-bit encodable"
            )
    if len(text) > MAX_SEPTETS:
        raise MessageTooLongError(f"{len(text)} septets exceeds the {MAX_SEPTETS} cap")
    return text


def ensure_msisdn(digits: str) -> str:
    """Validate *digits* as a destination number (1-20 decimal digits)."""
    if not digits or len(digits) > MAX_ADDRESS_DIGITS:
        raise InvalidNumberError(f"number must be 1-{MAX_ADDRESS_DIGITS} digits, got {len(digits)}")
    if not all(c in string.digits for c in digits):
        raise InvalidNumberError(f"non-digit character in number {digits!r}")
    return digits


def _ud_octet_count(septet_count: int) -> int:
    return (7 * septet_count + 7) // 8


@dataclass(frozen=True)
class PackedUserData:
    """Septet payload packed into octets; ``octets`` holds ceil(7n/8) bytes."""

    octets: bytes
    septet_count: int

    def __post_init__(self) -> None:
        if self.septet_count < 0:
            raise MalformedPayloadError("negative septet count")
        expected = _ud_octet_count(self.septet_count)
        if len(self.octets) != expected:
            raise MalformedPayloadError(
                f"{self.septet_count} septets need {expected} octets, got {len(self.octets)}"
            )


def pack_septets(text: str) -> PackedUserData:
    """Pack *text* into octets, low bits first.

    Octet k carries the remaining low bits of septet k with the low bits of
    septet k+1 stacked on top; the final partial octet is zero-padded.
    """
    ensure_gsm7_text(text)
    out = bytearray()
    acc = 0
    nbits = 0
    for ch in text:
        acc |= ord(ch) << nbits
        nbits += 7
        while nbits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            nbits -= 8
    if nbits:
        out.append(acc & 0xFF)
    return PackedUserData(octets=bytes(out), septet_count=len(text))


def unpack_septets(data: PackedUserData) -> str:
    """Exact inverse of :func:`pack_septets`; returns ``septet_count`` characters."""
    chars: list[str] = []
    acc = 0
    nbits = 0
    for byte in data.octets:
        acc |= byte << nbits
        nbits += 8
        while nbits >= 7 and len(chars) < data.septet_count:
            chars.append(chr(acc & 0x7F))
            acc >>= 7
            nbits -= 7
    if len(chars) != data.septet_count:
        raise MalformedPayloadError(
            f"payload yielded {len(chars)} septets, expected {data.septet_count}"
        )
    return "".join(chars)


def encode_semioctets(number: str) -> str:
    """Render a digit string with successive digit pairs swapped.

    Odd-length numbers are padded with a trailing F nibble before the swap so
    decoding stays unambiguous.
    """
    digits = ensure_msisdn(number)
    if len(digits) % 2:
        digits += "F"
    return "".join(digits[i + 1] + digits[i] for i in range(0, len(digits), 2))


def decode_semioctets(encoded: str) -> str:
    """Invert :func:`encode_semioctets`: swap pairs back, strip one pad nibble."""
    if len(encoded) % 2:
        raise MalformedPayloadError("semi-octet string must have even length")
    swapped = "".join(encoded[i + 1] + encoded[i] for i in range(0, len(encoded), 2))
    if swapped.endswith(("F", "f")):
        swapped = swapped[:-1]
    return ensure_msisdn(swapped)


@dataclass(frozen=True)
class SubmitPdu:
    """Structured SMS-SUBMIT frame; all non-payload fields are fixed."""

    da_digits: str
    user_data: PackedUserData
    smsc_info_octet: int = SMSC_INFO_OCTET
    first_octet: int = FIRST_OCTET
    message_ref: int = MESSAGE_REF
    da_type: int = DA_TYPE
    pid: int = PROTOCOL_ID
    dcs: int = DATA_CODING

    @property
    def da_length(self) -> int:
        """Address length counts digits, not semi-octet pairs."""
        return len(self.da_digits)

    @property
    def udl(self) -> int:
        return self.user_data.septet_count

    def to_hex(self) -> str:
        head = bytes(
            (self.smsc_info_octet, self.first_octet, self.message_ref, self.da_length, self.da_type)
        )
        tail = bytes((self.pid, self.dcs, self.udl))
        return (
            head.hex().upper()
            + encode_semioctets(self.da_digits)
            + tail.hex().upper()
            + self.user_data.octets.hex().upper()
        )


def build_submit_pdu(dest: str, text: str) -> str:
    """Uppercase hex SMS-SUBMIT frame for *text* addressed to *dest*."""
    ensure_msisdn(dest)
    return SubmitPdu(da_digits=dest, user_data=pack_septets(text)).to_hex()


def parse_submit_pdu(pdu_hex: str) -> SubmitPdu:
    """Parse a SUBMIT-shaped hex frame back into its fields.

    Only frames matching the fixed layout produced by :func:`build_submit_pdu`
    are accepted; anything else raises :class:`MalformedPayloadError`.
    """
    try:
        raw = bytes.fromhex(pdu_hex)
    except ValueError as exc:
        raise MalformedPayloadError(f"not a hex string: {exc}") from None
    if len(raw) < 8:
        raise MalformedPayloadError(f"frame too short: {len(raw)} octets")
    smsc, first, mref, da_len, da_type = raw[:5]
    if smsc != SMSC_INFO_OCTET or first != FIRST_OCTET or da_type != DA_TYPE:
        raise MalformedPayloadError("fixed header fields do not match a SUBMIT frame")
    semi = (da_len + 1) // 2
    pos = 5 + semi
    if len(raw) < pos + 3:
        raise MalformedPayloadError("frame truncated inside the address or header")
    digits = decode_semioctets(raw[5:pos].hex().upper())
    if len(digits) != da_len:
        raise MalformedPayloadError(f"address length {da_len} does not match {len(digits)} digits")
    pid, dcs, udl = raw[pos], raw[pos + 1], raw[pos + 2]
    if pid != PROTOCOL_ID or dcs != DATA_CODING:
        raise MalformedPayloadError("unsupported protocol id or coding scheme")
    ud = raw[pos + 3 :]
    user_data = PackedUserData(octets=ud, septet_count=udl)
    return SubmitPdu(da_digits=digits, user_data=user_data, message_ref=mref)


def pdu_text(pdu: SubmitPdu) -> str:
    """Decoded body of a parsed frame."""
    return unpack_septets(pdu.user_data)


def cmgs_length(pdu_hex: str) -> int:
    """Length argument for ``AT+CMGS``: (hex character count - 2) / 2.

    Equivalently the octet count of the frame minus the leading SMSC octet.
    """
    if len(pdu_hex) < 2 or len(pdu_hex) % 2:
        raise MalformedPayloadError(f"hex frame must have even length >= 2, got {len(pdu_hex)}")
    if not all(c in string.hexdigits for c in pdu_hex):
        raise MalformedPayloadError("frame contains non-hex characters")
    return (len(pdu_hex) - 2) // 2
