"""Corpus of Neno programs driven by both interpreters and the migration
drills. Each entry names the class whose no-argument main method starts it."""

from __future__ import annotations

PRELUDE = """prefix owl: <http://www.w3.org/2002/07/owl>;
prefix xsd: <http://www.w3.org/2001/XMLSchema>;
prefix demo: <http://neno.lanl.gov/demo>;
"""

HUMAN = PRELUDE + """
owl:Thing demo:Human {
  xsd:string hasName[1];
  demo:Human hasFriend[0..*];

  !Human(xsd:string n) {
    this.hasName = n;
  }

  makeFriend(demo:Human h) {
    if(h != this) {
      this.hasFriend =+ h;
    }
  }

  setName(xsd:string n) {
    this.hasName = n;
  }
}
"""

TEST = PRELUDE + """
owl:Thing demo:Test {
  main() {
    demo:Human h = new Human("Marko Rodriguez");
    h.setName("Marko Antonio Rodriguez");
  }
}
"""

CORPUS: dict[str, dict] = {}


def program(name: str, start: str, *sources: str) -> None:
    CORPUS[name] = {"start": start, "sources": list(sources)}


program("human_test", "Test", HUMAN, TEST)

program("arith_trace", "Calc", PRELUDE + """
owl:Thing demo:Calc {
  xsd:integer result[0..1];
  main() {
    xsd:integer x = 1 + (2 * 3);
    xsd:integer y = 10 - 4 / 2;
    this.result = x * y;
  }
}
""")

program("example_branch", "Probe", PRELUDE + """
owl:Thing demo:Talker {
  xsd:int example(xsd:string a) {
    if(a == "marko"^^xsd:string) {
      return "1"^^xsd:int;
    }
    else {
      return "2"^^xsd:int;
    }
  }
}

owl:Thing demo:Probe {
  xsd:int r1[0..1];
  xsd:int r2[0..1];
  main() {
    demo:Talker t = new Talker();
    this.r1 = t.example("marko"^^xsd:string);
    this.r2 = t.example("bob"^^xsd:string);
  }
}
""")

program("friends", "FriendMain", PRELUDE + """
owl:Thing demo:Person {
  xsd:string hasName[1];
  demo:Person hasFriend[0..*];

  !Person(xsd:string n) {
    this.hasName = n;
  }

  makeFriend(demo:Person h) {
    if(h != this) {
      this.hasFriend =+ h;
    }
  }

  makeEnemy(demo:Person h) {
    this.hasFriend =- h;
  }

  dropAll() {
    if(this.hasFriend =? this) {
      return;
    }
    this.hasFriend =/;
  }

  xsd:boolean isFriend(demo:Person unknown) {
    if(this.hasFriend =? unknown) {
      return true;
    }
    else {
      return false;
    }
  }
}

owl:Thing demo:FriendMain {
  xsd:boolean before[0..1];
  xsd:boolean after[0..1];
  main() {
    demo:Person a = new Person("A");
    demo:Person b = new Person("B");
    demo:Person c = new Person("C");
    a.makeFriend(b);
    a.makeFriend(c);
    this.before = a.isFriend(b);
    a.makeEnemy(b);
    this.after = a.isFriend(b);
    c.makeFriend(a);
    c.dropAll();
  }
}
""")

program("inverse_ref", "InvMain", PRELUDE + """
owl:Thing demo:Node {
  xsd:string hasName[1];
  demo:Node linksTo[0..*];

  !Node(xsd:string n) {
    this.hasName = n;
  }

  link(demo:Node o) {
    this.linksTo =+ o;
  }

  xsd:integer inbound() {
    demo:Node h[0..2] = this..linksTo;
    xsd:integer n = 0;
    for(demo:Node x : this..linksTo) {
      n = n + 1;
    }
    return n;
  }
}

owl:Thing demo:InvMain {
  xsd:integer count2[0..1];
  main() {
    demo:Node a = new Node("a");
    demo:Node b = new Node("b");
    demo:Node c = new Node("c");
    a.link(c);
    b.link(c);
    this.count2 = c.inbound();
  }
}
""")

program("inverse_invoke", "CutMain", PRELUDE + """
owl:Thing demo:Pal {
  xsd:string hasName[1];
  demo:Pal hasFriend[0..*];

  !Pal(xsd:string n) {
    this.hasName = n;
  }

  befriend(demo:Pal h) {
    this.hasFriend =+ h;
  }

  makeEnemy(demo:Pal h) {
    this.hasFriend =- h;
  }

  cutTies() {
    this..hasFriend.makeEnemy(this);
  }
}

owl:Thing demo:CutMain {
  main() {
    demo:Pal a = new Pal("a");
    demo:Pal b = new Pal("b");
    demo:Pal c = new Pal("c");
    a.befriend(c);
    b.befriend(c);
    a.befriend(b);
    c.cutTies();
  }
}
""")

program("loops", "Loops", PRELUDE + """
owl:Thing demo:Loops {
  xsd:integer sum[0..1];
  xsd:integer fact[0..1];
  main() {
    xsd:integer s = 0;
    for(xsd:integer i = 0; i <= 9; i++) {
      s = s + i;
    }
    this.sum = s;
    xsd:integer f = 1;
    xsd:integer k = 5;
    while(k >= 2) {
      f = f * k;
      k = k - 1;
    }
    this.fact = f;
  }
}
""")

program("field_loop", "FaceMain", PRELUDE + """
owl:Thing demo:Face {
  xsd:string hasName[1];
  demo:Face hasFriend[0..*];

  !Face(xsd:string n) {
    this.hasName = n;
  }

  befriend(demo:Face h) {
    this.hasFriend =+ h;
  }

  namelessFaces() {
    for(demo:Face h : this.hasFriend) {
      h.hasName = "..."^^xsd:string;
    }
    for(xsd:integer i=0; i<this.hasFriend*; i++) {
      demo:Face h = this.hasFriend[i];
      h.hasName = "."^^xsd:string;
    }
  }
}

owl:Thing demo:FaceMain {
  main() {
    demo:Face a = new Face("a");
    demo:Face b = new Face("b");
    demo:Face c = new Face("c");
    a.befriend(b);
    a.befriend(c);
    a.namelessFaces();
  }
}
""")

program("destructor", "DeleteMain", PRELUDE + """
owl:Thing demo:Mortal {
  xsd:string hasName[1];
  demo:Mortal hasFriend[0..*];

  !Mortal(xsd:string n) {
    this.hasName = n;
  }

  befriend(demo:Mortal h) {
    this.hasFriend =+ h;
  }

  ~Mortal() {
    this.hasName =/;
    this.hasFriend =/;
    this..hasFriend =/;
  }
}

owl:Thing demo:DeleteMain {
  main() {
    demo:Mortal marko = new Mortal("marko");
    demo:Mortal johan = new Mortal("johan");
    marko.befriend(johan);
    johan.befriend(marko);
    delete marko;
  }
}
""")

program("netquery", "SeekMain", PRELUDE + """
owl:Thing demo:Seeker {
  xsd:string hasName[1];
  demo:Seeker found[0..1];

  !Seeker(xsd:string n) {
    this.hasName = n;
  }

  seek(xsd:string nm) {
    xsd:string query =
      "SELECT ?x WHERE { ?x <demo:hasName> \\"" + nm +
      "\\"^^<http://www.w3.org/2001/XMLSchema#string> } LIMIT 1";
    demo:Seeker h[0..1] <? query;
    h <? query;
    this.found = h;
  }
}

owl:Thing demo:SeekMain {
  main() {
    demo:Seeker a = new Seeker("alpha");
    demo:Seeker b = new Seeker("beta");
    a.seek("beta");
  }
}
""")

program("typeofs", "TypeMain", PRELUDE + """
owl:Thing demo:Base {
}

demo:Base demo:Derived {
}

owl:Thing demo:TypeMain {
  xsd:boolean isBase[0..1];
  xsd:boolean isDerived[0..1];
  xsd:boolean isRes[0..1];
  xsd:anyURI kind[0..1];
  main() {
    demo:Derived d = new Derived();
    this.isBase = d typeof demo:Base;
    this.isDerived = d typeof demo:Derived;
    this.isRes = d typeof rdfs:Resource;
    this.kind = d typeof?;
  }
}
""")

program("recursion", "RecMain", PRELUDE + """
owl:Thing demo:Math {
  xsd:integer fact(xsd:integer n) {
    if(n < 2) {
      return 1;
    }
    else {
      return n * this.fact(n - 1);
    }
  }
}

owl:Thing demo:RecMain {
  xsd:integer result[0..1];
  main() {
    demo:Math m = new Math();
    this.result = m.fact(6);
  }
}
""")

program("scoping", "Scope", PRELUDE + """
owl:Thing demo:Scope {
  xsd:integer r[0..1];
  main() {
    xsd:integer a = 11;
    if(a < 10) {
      xsd:integer y = a + 1;
      this.r = y;
    }
    else {
      xsd:integer y = a + 2;
      this.r = y;
    }
  }
}
""")

program("datatypes", "Data", PRELUDE + """
owl:Thing demo:Data {
  xsd:string s[0..1];
  xsd:boolean b1[0..1];
  xsd:boolean b2[0..1];
  xsd:date d[0..1];
  xsd:double x[0..1];
  main() {
    this.s = "neno"^^xsd:string + "fhat"^^xsd:string;
    this.b1 = "2007-11-30"^^xsd:date < "2007-12-01"^^xsd:date;
    this.b2 = !("1"^^xsd:integer == "1"^^xsd:integer);
    this.d = "2007-11-30"^^xsd:date + 7;
    this.x = "1.5"^^xsd:double * "4.0"^^xsd:double;
  }
}
""")

program("varops", "VarOps", PRELUDE + """
owl:Thing demo:VarOps {
  xsd:integer vals[0..*];
  main() {
    xsd:integer a[0..*];
    a =+ 1;
    a =+ 2;
    a =+ 3;
    a =- 2;
    this.vals = a;
    a =/;
    a =+ 9;
    this.vals =+ a;
  }
}
""")
