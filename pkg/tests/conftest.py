import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from intentforge.ingest import CoBuyPair, Item

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def toy_dir() -> str:
    return os.path.join(FIXTURES, "toy")


def make_item(item_id: str, title: str, category: str = "Clothing") -> Item:
    return Item(id=item_id, title=title, category=category)


def make_pair(id1: str = "a", id2: str = "b", title1: str = "Red Shirt", title2: str = "Blue Jeans") -> CoBuyPair:
    return CoBuyPair.make(make_item(id1, title1), make_item(id2, title2))
